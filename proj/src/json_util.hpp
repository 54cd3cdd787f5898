// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

#include "stagescore/tensor.hpp"
#include "json.hpp"

namespace stagescore::jsonutil {

inline nlohmann::json tensor_to_json(const Tensor& t) {
    return nlohmann::json{{"shape", t.shape()}, {"data", t.data()}};
}

inline Tensor tensor_from_json(const nlohmann::json& j) {
    return Tensor(j.at("shape").get<std::vector<int>>(),
                  j.at("data").get<std::vector<double>>());
}

}  // namespace stagescore::jsonutil
