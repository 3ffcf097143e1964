#pragma once

#include "cwpca/classifier.hpp"
#include "cwpca/error.hpp"
#include "cwpca/hsio.hpp"
#include "cwpca/linalg.hpp"
#include "cwpca/metrics.hpp"
#include "cwpca/pipeline.hpp"
#include "cwpca/rng.hpp"
#include "cwpca/synth.hpp"
#include "cwpca/transforms.hpp"
