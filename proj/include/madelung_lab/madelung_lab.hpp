#ifndef MADELUNG_LAB_MADELUNG_LAB_HPP
#define MADELUNG_LAB_MADELUNG_LAB_HPP

#include "madelung_lab/config.hpp"
#include "madelung_lab/derivative.hpp"
#include "madelung_lab/ensemble.hpp"
#include "madelung_lab/error.hpp"
#include "madelung_lab/fft.hpp"
#include "madelung_lab/fields.hpp"
#include "madelung_lab/gaussian.hpp"
#include "madelung_lab/madelung.hpp"
#include "madelung_lab/schrodinger.hpp"
#include "madelung_lab/statistics.hpp"
#include "madelung_lab/suite.hpp"
#include "madelung_lab/svg.hpp"

#endif  // MADELUNG_LAB_MADELUNG_LAB_HPP
