#pragma once

#include "idiff/answer_model.hpp"
#include "idiff/codec.hpp"
#include "idiff/evaluation.hpp"
#include "idiff/features.hpp"
#include "idiff/image.hpp"
#include "idiff/iqa_scores.hpp"
#include "idiff/manifest.hpp"
#include "idiff/metrics.hpp"
#include "idiff/mllm_client.hpp"
#include "idiff/pipeline.hpp"
#include "idiff/rationale.hpp"
#include "idiff/remote.hpp"
#include "idiff/synthetic.hpp"
