#pragma once

#include "mrrg/checkpoint.hpp"
#include "mrrg/config.hpp"
#include "mrrg/dataset.hpp"
#include "mrrg/dump.hpp"
#include "mrrg/encoder.hpp"
#include "mrrg/experiment.hpp"
#include "mrrg/interaction.hpp"
#include "mrrg/kg.hpp"
#include "mrrg/kg_attention.hpp"
#include "mrrg/model.hpp"
#include "mrrg/recurrent.hpp"
#include "mrrg/rgcn.hpp"
#include "mrrg/rng.hpp"
#include "mrrg/subgraph.hpp"
#include "mrrg/synth.hpp"
#include "mrrg/tensor.hpp"
#include "mrrg/train.hpp"
