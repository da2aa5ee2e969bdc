#pragma once

#include "spatialid/attention.hpp"
#include "spatialid/core.hpp"
#include "spatialid/harness.hpp"
#include "spatialid/injector.hpp"
#include "spatialid/io.hpp"
#include "spatialid/mask_extractor.hpp"
#include "spatialid/scheduler.hpp"
