#pragma once

// Umbrella header.

#include "isochron/cutoff.hpp"
#include "isochron/dual.hpp"
#include "isochron/error.hpp"
#include "isochron/expr.hpp"
#include "isochron/jet.hpp"
#include "isochron/model.hpp"
#include "isochron/periodic.hpp"
#include "isochron/quadrature.hpp"
#include "isochron/series.hpp"
#include "isochron/solution.hpp"
#include "isochron/solver_variational.hpp"
#include "isochron/solver_zero.hpp"
#include "isochron/tail.hpp"
#include "isochron/validate.hpp"
