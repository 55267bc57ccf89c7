#pragma once

#include "xbs/backtest.hpp"
#include "xbs/contract.hpp"
#include "xbs/dynamics.hpp"
#include "xbs/error.hpp"
#include "xbs/grid.hpp"
#include "xbs/market_data.hpp"
#include "xbs/monte_carlo.hpp"
#include "xbs/pde.hpp"
#include "xbs/tridiagonal.hpp"
