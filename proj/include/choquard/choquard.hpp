#pragma once

#include "choquard/commands.hpp"
#include "choquard/energy.hpp"
#include "choquard/fft.hpp"
#include "choquard/fiber.hpp"
#include "choquard/field_io.hpp"
#include "choquard/grid.hpp"
#include "choquard/minimize.hpp"
#include "choquard/problem.hpp"
#include "choquard/report.hpp"
#include "choquard/riesz.hpp"
#include "choquard/thresholds.hpp"
