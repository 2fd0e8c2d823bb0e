#pragma once

#include "kayacap/error.hpp"
#include "kayacap/time_series.hpp"
#include "kayacap/model.hpp"
#include "kayacap/integrator.hpp"
#include "kayacap/ingestion.hpp"
#include "kayacap/keyvalue.hpp"
#include "kayacap/calibration.hpp"
#include "kayacap/scenario.hpp"
