#pragma once

// Umbrella header.

#include "saber/auroc.hpp"
#include "saber/belief_net.hpp"
#include "saber/checkpoint.hpp"
#include "saber/core.hpp"
#include "saber/decision.hpp"
#include "saber/error.hpp"
#include "saber/feature_io.hpp"
#include "saber/features.hpp"
#include "saber/instance_io.hpp"
#include "saber/matcher.hpp"
#include "saber/metrics.hpp"
#include "saber/pipeline.hpp"
#include "saber/random.hpp"
#include "saber/synth.hpp"
