/*
 * Umbrella header for the adjdae library.
 */
#pragma once

#include "adjoint.hpp"
#include "dae.hpp"
#include "errors.hpp"
#include "estimator.hpp"
#include "forward.hpp"
#include "numerics.hpp"
#include "problems.hpp"
#include "reduction.hpp"
