#pragma once

#include "distmean/cluster.hpp"
#include "distmean/harness.hpp"
#include "distmean/hotelling.hpp"
#include "distmean/rng.hpp"
#include "distmean/sampler.hpp"
#include "distmean/signtest.hpp"
#include "distmean/statdist.hpp"
#include "distmean/types.hpp"
