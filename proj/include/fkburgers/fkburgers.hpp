#pragma once

#include "brownian.hpp"
#include "characteristics.hpp"
#include "config.hpp"
#include "constants.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "grid_field.hpp"
#include "harness.hpp"
#include "linalg.hpp"
#include "oracle.hpp"
#include "parallel.hpp"
#include "path_record.hpp"
#include "picard.hpp"
#include "report.hpp"
#include "scalar_flows.hpp"
#include "time_ordered.hpp"
#include "velocity.hpp"
#include "zones.hpp"
