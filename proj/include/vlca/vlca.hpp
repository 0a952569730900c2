// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlca/batch.hpp"
#include "vlca/core.hpp"
#include "vlca/decouple.hpp"
#include "vlca/embeddings.hpp"
#include "vlca/error.hpp"
#include "vlca/experiment.hpp"
#include "vlca/gradient_suite.hpp"
#include "vlca/io.hpp"
#include "vlca/lowrank.hpp"
#include "vlca/model.hpp"
#include "vlca/objective.hpp"
#include "vlca/semantics.hpp"
#include "vlca/svd.hpp"
#include "vlca/synth.hpp"
#include "vlca/trainer.hpp"
