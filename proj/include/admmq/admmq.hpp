// Umbrella header.
#pragma once

#include <admmq/admm.hpp>
#include <admmq/checkpoint.hpp>
#include <admmq/common.hpp>
#include <admmq/config.hpp>
#include <admmq/data.hpp>
#include <admmq/gemm.hpp>
#include <admmq/layers.hpp>
#include <admmq/model.hpp>
#include <admmq/optimizer.hpp>
#include <admmq/packed.hpp>
#include <admmq/progressive.hpp>
#include <admmq/quadratic.hpp>
#include <admmq/quantizer.hpp>
#include <admmq/rng.hpp>
#include <admmq/tensor.hpp>
