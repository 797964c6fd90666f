#pragma once

// Umbrella header for the whole library.

#include "stekit/autodiff.hpp"
#include "stekit/checkpoint.hpp"
#include "stekit/error.hpp"
#include "stekit/pipeline.hpp"
#include "stekit/planner.hpp"
#include "stekit/reference.hpp"
#include "stekit/rng.hpp"
#include "stekit/serialize.hpp"
#include "stekit/spec_string.hpp"
#include "stekit/ste.hpp"
#include "stekit/tensor.hpp"
#include "stekit/training.hpp"
#include "stekit/verify.hpp"
