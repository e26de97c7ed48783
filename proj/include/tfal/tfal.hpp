#pragma once

#include "tfal/affinity.hpp"
#include "tfal/commands.hpp"
#include "tfal/error.hpp"
#include "tfal/manifest.hpp"
#include "tfal/metrics.hpp"
#include "tfal/noise.hpp"
#include "tfal/parallel.hpp"
#include "tfal/rectifier.hpp"
#include "tfal/rng.hpp"
#include "tfal/tensor.hpp"
#include "tfal/tensor_io.hpp"
