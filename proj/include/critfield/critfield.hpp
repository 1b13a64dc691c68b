#pragma once

#include "critfield/common.hpp"
#include "critfield/construction.hpp"
#include "critfield/covering.hpp"
#include "critfield/hitting.hpp"
#include "critfield/lattice.hpp"
#include "critfield/logscale.hpp"
#include "critfield/parallel.hpp"
#include "critfield/params.hpp"
#include "critfield/quadrature.hpp"
#include "critfield/rng.hpp"
#include "critfield/sojourn.hpp"
#include "critfield/special.hpp"
#include "critfield/spectral.hpp"
#include "critfield/stats.hpp"
#include "critfield/variance.hpp"
