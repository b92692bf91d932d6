#pragma once

#include "contrastive.hpp"
#include "dataset.hpp"
#include "geo.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "regressor.hpp"
#include "safe.hpp"
#include "spatial.hpp"
#include "splits.hpp"
#include "synth.hpp"
