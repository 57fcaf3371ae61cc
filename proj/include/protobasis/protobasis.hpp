#pragma once

// Umbrella header.
#include "protobasis/error.hpp"
#include "protobasis/eval.hpp"
#include "protobasis/hull.hpp"
#include "protobasis/io.hpp"
#include "protobasis/mixfit.hpp"
#include "protobasis/model.hpp"
#include "protobasis/quantize.hpp"
#include "protobasis/rng.hpp"
#include "protobasis/synth.hpp"

namespace protobasis {
inline constexpr const char* kVersion = "0.1.0";
}
