#pragma once

#include "hkin/automaton.hpp"
#include "hkin/changepoint.hpp"
#include "hkin/config.hpp"
#include "hkin/error.hpp"
#include "hkin/geometry.hpp"
#include "hkin/io.hpp"
#include "hkin/mlesac.hpp"
#include "hkin/models.hpp"
#include "hkin/resample.hpp"
#include "hkin/synth.hpp"
