#pragma once

#include <stlfunnel/common.hpp>
#include <stlfunnel/contracts.hpp>
#include <stlfunnel/controller.hpp>
#include <stlfunnel/funnel.hpp>
#include <stlfunnel/io.hpp>
#include <stlfunnel/monitor.hpp>
#include <stlfunnel/network.hpp>
#include <stlfunnel/parser.hpp>
#include <stlfunnel/plot.hpp>
#include <stlfunnel/project.hpp>
#include <stlfunnel/simulate.hpp>
#include <stlfunnel/stl.hpp>
