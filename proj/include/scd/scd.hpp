#pragma once
// Umbrella header.
#include "scd/clustering.hpp"
#include "scd/common.hpp"
#include "scd/dataset.hpp"
#include "scd/engine.hpp"
#include "scd/io.hpp"
#include "scd/learner.hpp"
#include "scd/metrics.hpp"
#include "scd/ood.hpp"
#include "scd/parallel.hpp"
#include "scd/selection.hpp"
