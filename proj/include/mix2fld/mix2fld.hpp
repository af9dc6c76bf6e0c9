#pragma once

// Umbrella header for the Mix2FLD simulator library.

#include "mix2fld/channel.hpp"
#include "mix2fld/config.hpp"
#include "mix2fld/data.hpp"
#include "mix2fld/errors.hpp"
#include "mix2fld/harness.hpp"
#include "mix2fld/linalg.hpp"
#include "mix2fld/mixup.hpp"
#include "mix2fld/nn.hpp"
#include "mix2fld/presets.hpp"
#include "mix2fld/protocols.hpp"
#include "mix2fld/rng.hpp"
#include "mix2fld/sample.hpp"
