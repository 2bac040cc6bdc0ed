#pragma once

// Umbrella header for the covdec library.

#include "covdec/coherence.hpp"
#include "covdec/common.hpp"
#include "covdec/experiment.hpp"
#include "covdec/levy.hpp"
#include "covdec/posdec.hpp"
#include "covdec/qlbe.hpp"
#include "covdec/rng.hpp"
#include "covdec/serialization.hpp"
#include "covdec/specfun.hpp"
#include "covdec/unravel.hpp"
#include "covdec/vec3.hpp"
#include "covdec/version.hpp"
