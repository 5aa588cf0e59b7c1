#pragma once

#include "codeflow/canonical.hpp"
#include "codeflow/flow.hpp"
#include "codeflow/lie_engine.hpp"
#include "codeflow/lie_word.hpp"
#include "codeflow/poly_vf.hpp"
#include "codeflow/random_fields.hpp"
#include "codeflow/rational.hpp"
#include "codeflow/smooth_field.hpp"
#include "codeflow/trainer.hpp"
