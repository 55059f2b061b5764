#pragma once

#include "a3/approx_attention.hpp"
#include "a3/approx_search.hpp"
#include "a3/base_pipeline.hpp"
#include "a3/cycle_model.hpp"
#include "a3/error.hpp"
#include "a3/fixedpoint.hpp"
#include "a3/matrix.hpp"
#include "a3/reference.hpp"
