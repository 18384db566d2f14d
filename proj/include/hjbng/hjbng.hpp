#pragma once

// Everything in one include.

#include "hjbng/errors.hpp"
#include "hjbng/fd_solver.hpp"
#include "hjbng/galerkin.hpp"
#include "hjbng/galerkin_system.hpp"
#include "hjbng/harness.hpp"
#include "hjbng/mc_validator.hpp"
#include "hjbng/model.hpp"
#include "hjbng/pricing.hpp"
#include "hjbng/quadrature.hpp"
#include "hjbng/trial.hpp"
