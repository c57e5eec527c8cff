#pragma once

#include "slab/dist.hpp"
#include "slab/error.hpp"
#include "slab/lm/generate.hpp"
#include "slab/lm/model.hpp"
#include "slab/lm/ngram.hpp"
#include "slab/lm/replay.hpp"
#include "slab/lm/vocab.hpp"
#include "slab/metrics.hpp"
#include "slab/parallel.hpp"
#include "slab/properties.hpp"
#include "slab/rng.hpp"
#include "slab/sweep.hpp"
#include "slab/temp_solver.hpp"
#include "slab/transform_spec.hpp"
#include "slab/transforms.hpp"
