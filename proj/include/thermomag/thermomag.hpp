#pragma once

#include "thermomag/error.hpp"
#include "thermomag/mesh.hpp"
#include "thermomag/fem.hpp"
#include "thermomag/young_measure.hpp"
#include "thermomag/magnetostatics.hpp"
#include "thermomag/gibbs_energy.hpp"
#include "thermomag/step_minimizer.hpp"
#include "thermomag/thermal.hpp"
#include "thermomag/driver.hpp"
#include "thermomag/io.hpp"
#include "thermomag/verify.hpp"
