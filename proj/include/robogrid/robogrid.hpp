#pragma once

#include "robogrid/episode_ingest.hpp"
#include "robogrid/error.hpp"
#include "robogrid/feature_file.hpp"
#include "robogrid/grid_codec.hpp"
#include "robogrid/image.hpp"
#include "robogrid/lora.hpp"
#include "robogrid/metrics.hpp"
#include "robogrid/pipeline.hpp"
#include "robogrid/png_io.hpp"
#include "robogrid/supervision.hpp"
#include "robogrid/trajectory_overlay.hpp"
