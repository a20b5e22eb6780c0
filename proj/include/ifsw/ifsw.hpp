#pragma once

#include "expr.hpp"
#include "grid.hpp"
#include "system.hpp"
#include "transfer.hpp"
#include "markov.hpp"
#include "holonomic.hpp"
#include "pressure.hpp"
