#pragma once

#include "ewps/diagnostics.hpp"
#include "ewps/distribution.hpp"
#include "ewps/errors.hpp"
#include "ewps/fit.hpp"
#include "ewps/likelihood.hpp"
#include "ewps/power_series.hpp"
#include "ewps/random.hpp"
