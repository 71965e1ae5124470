#pragma once

#include "lmt/error.hpp"
#include "lmt/physconfig.hpp"
#include "lmt/numeric.hpp"
#include "lmt/pulses.hpp"
#include "lmt/blochband.hpp"
#include "lmt/wsspectrum.hpp"
#include "lmt/adiabatic.hpp"
#include "lmt/tdse.hpp"
#include "lmt/scenario.hpp"
#include "lmt/io.hpp"
#include "lmt/scanner.hpp"
