#pragma once

#include "flatband/errors.hpp"
#include "flatband/quadrature.hpp"
#include "flatband/lattice.hpp"
#include "flatband/wannier.hpp"
#include "flatband/kernel.hpp"
#include "flatband/gaussian.hpp"
#include "flatband/approx_models.hpp"
#include "flatband/interactions.hpp"
#include "flatband/lindblad.hpp"
#include "flatband/io.hpp"
#include "flatband/experiments.hpp"
