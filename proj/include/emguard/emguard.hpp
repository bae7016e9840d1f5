#pragma once

// Umbrella header.

#include "emguard/bits.hpp"
#include "emguard/detector.hpp"
#include "emguard/emission.hpp"
#include "emguard/errors.hpp"
#include "emguard/harness.hpp"
#include "emguard/monitor.hpp"
#include "emguard/report_io.hpp"
#include "emguard/trace_io.hpp"
#include "emguard/transmitter.hpp"
