#pragma once

#include "rdom/core.hpp"
#include "rdom/model.hpp"
#include "rdom/scattering.hpp"
#include "rdom/spectra.hpp"
