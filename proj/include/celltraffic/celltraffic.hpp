#pragma once

#include "celltraffic/checkpoint.hpp"
#include "celltraffic/correlation.hpp"
#include "celltraffic/error.hpp"
#include "celltraffic/evaluation.hpp"
#include "celltraffic/grid_core.hpp"
#include "celltraffic/ingest.hpp"
#include "celltraffic/io.hpp"
#include "celltraffic/nn/batchnorm.hpp"
#include "celltraffic/nn/conv.hpp"
#include "celltraffic/nn/model.hpp"
#include "celltraffic/nn/ops.hpp"
#include "celltraffic/nn/tensor.hpp"
#include "celltraffic/trainer.hpp"
#include "celltraffic/windowing.hpp"
