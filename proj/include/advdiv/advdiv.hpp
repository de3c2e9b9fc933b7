#pragma once

#include "advdiv/channel.hpp"
#include "advdiv/combining.hpp"
#include "advdiv/config.hpp"
#include "advdiv/dsp.hpp"
#include "advdiv/error.hpp"
#include "advdiv/frontend.hpp"
#include "advdiv/harness.hpp"
#include "advdiv/io.hpp"
#include "advdiv/metrics.hpp"
#include "advdiv/modem.hpp"
#include "advdiv/random.hpp"
#include "advdiv/vec3.hpp"
