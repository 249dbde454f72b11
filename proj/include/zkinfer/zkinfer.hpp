#pragma once

#include "zkinfer/artifacts.hpp"
#include "zkinfer/bench.hpp"
#include "zkinfer/circuit.hpp"
#include "zkinfer/compiler.hpp"
#include "zkinfer/errors.hpp"
#include "zkinfer/field.hpp"
#include "zkinfer/gadgets.hpp"
#include "zkinfer/model.hpp"
#include "zkinfer/pipeline.hpp"
#include "zkinfer/proof.hpp"
#include "zkinfer/quant.hpp"
#include "zkinfer/sha256.hpp"
#include "zkinfer/tensor.hpp"
#include "zkinfer/witness.hpp"
