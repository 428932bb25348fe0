#pragma once

#include "fdfx/error.hpp"
#include "fdfx/rng.hpp"
#include "fdfx/parallel.hpp"
#include "fdfx/splinebasis.hpp"
#include "fdfx/dataset.hpp"
#include "fdfx/fit.hpp"
#include "fdfx/stats.hpp"
#include "fdfx/bootstrap.hpp"
#include "fdfx/bands.hpp"
#include "fdfx/testkit.hpp"
#include "fdfx/simlab.hpp"
#include "fdfx/io.hpp"
