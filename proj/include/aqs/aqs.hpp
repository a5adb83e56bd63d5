#pragma once

// Umbrella header for the arbitrated quantum signature simulator.

#include "aqs/adversary.hpp"
#include "aqs/bits.hpp"
#include "aqs/codec.hpp"
#include "aqs/key.hpp"
#include "aqs/measure.hpp"
#include "aqs/otp.hpp"
#include "aqs/protocol.hpp"
#include "aqs/random.hpp"
#include "aqs/record.hpp"
#include "aqs/state.hpp"
