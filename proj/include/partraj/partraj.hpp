#pragma once

#include "partraj/basis.hpp"
#include "partraj/problem.hpp"
#include "partraj/trajectory.hpp"
#include "partraj/parallel.hpp"
#include "partraj/lbfgs.hpp"
#include "partraj/general.hpp"
#include "partraj/admm.hpp"
#include "partraj/oracle.hpp"
#include "partraj/synthetic.hpp"
#include "partraj/io.hpp"
