// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "stagescore/grad_check.hpp"
#include "stagescore/losses.hpp"
#include "stagescore/rng.hpp"
#include "oracles.hpp"

using namespace stagescore;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -3.0, double hi = 3.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

Tensor random_targets(std::vector<int> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    return t;
}

}  // namespace

TEST_CASE("focal loss closed form at a coin-flip logit") {
    // logit 0 gives p = 1/2; target 1, alpha 0.25, gamma 2:
    // 0.25 * (1/2)^2 * ln 2.
    const double loss = focal_loss(Tensor::from_rows({{0.0}}), Tensor::from_rows({{1.0}}));
    CHECK(std::abs(loss - 0.25 * 0.25 * std::log(2.0)) < 1e-12);
}

TEST_CASE("confident correct predictions cost nothing") {
    const Tensor logits = Tensor::from_rows({{40.0, -40.0}});
    const Tensor targets = Tensor::from_rows({{1.0, 0.0}});
    CHECK(focal_loss(logits, targets) < 1e-6);
    CHECK(bce_loss(Tensor::from_rows({{1.0, 0.0}}), targets) < 1e-6);
}

TEST_CASE("gamma zero reduces focal to alpha-weighted cross-entropy") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor logits = random_tensor({3, 4}, rng);
        // All-positive targets with alpha 1 make the alpha weight vanish.
        const Tensor ones = Tensor::full({3, 4}, 1.0);
        Tensor probs(logits.shape());
        for (std::size_t i = 0; i < probs.size(); ++i)
            probs.data()[i] = oracle::sigmoid(logits.data()[i]);
        CHECK(std::abs(focal_loss(logits, ones, 1.0, 0.0) - bce_loss(probs, ones)) < 1e-10);

        // With alpha 1/2 and mixed targets the two losses differ by exactly
        // the factor 1/2.
        const Tensor mixed = random_targets({3, 4}, rng);
        CHECK(std::abs(focal_loss(logits, mixed, 0.5, 0.0) - 0.5 * bce_loss(probs, mixed)) <
              1e-10);
    }
}

TEST_CASE("focal loss matches the scalar oracle") {
    Rng rng(32);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor logits = random_tensor({4, 5}, rng);
        const Tensor targets = random_targets({4, 5}, rng);
        const double alpha = rng.uniform(0.1, 1.0);
        const double gamma = rng.uniform(0.0, 4.0);
        const double expected =
            oracle::focal(oracle::to_mat(logits), oracle::to_mat(targets), alpha, gamma);
        CHECK(std::abs(focal_loss(logits, targets, alpha, gamma) - expected) < 1e-10);
    }
}

TEST_CASE("bce closed forms and oracle agreement") {
    CHECK(std::abs(bce_loss(Tensor::from_rows({{0.5, 0.5}}), Tensor::from_rows({{1.0, 0.0}})) -
                   std::log(2.0)) < 1e-12);
    const double expected = -(std::log(0.9) + std::log(0.8)) / 2.0;
    CHECK(std::abs(bce_loss(Tensor::from_rows({{0.9, 0.2}}), Tensor::from_rows({{1.0, 0.0}})) -
                   expected) < 1e-12);

    Rng rng(33);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor probs = random_tensor({3, 6}, rng, 0.01, 0.99);
        Tensor targets = random_targets({3, 6}, rng);
        CHECK(std::abs(bce_loss(probs, targets) -
                       oracle::bce(oracle::to_mat(probs), oracle::to_mat(targets))) < 1e-10);
    }
}

TEST_CASE("targets outside zero-one are rejected") {
    CHECK_THROWS_AS(focal_loss(Tensor::from_rows({{0.0}}), Tensor::from_rows({{0.5}})),
                    std::invalid_argument);
    CHECK_THROWS_AS(bce_loss(Tensor::from_rows({{0.5}}), Tensor::from_rows({{2.0}})),
                    std::invalid_argument);
    CHECK_THROWS_AS(focal_loss(Tensor::from_rows({{0.0}}), Tensor::from_rows({{1.0}}), 1.5, 2.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(focal_loss(Tensor::from_rows({{0.0}}), Tensor::from_rows({{1.0}}), 0.25, -1.0),
                    std::invalid_argument);
}

TEST_CASE("mse closed forms") {
    CHECK(mse_loss({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
    CHECK(std::abs(mse_loss({4.0, 5.0}, {1.0, 2.0}) - 9.0) < 1e-12);
    CHECK(std::abs(mse_loss({1.0, 3.0}, {0.0, 0.0}) - 5.0) < 1e-12);
    CHECK_THROWS_AS(mse_loss({1.0}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(mse_loss(std::vector<double>{}, std::vector<double>{}),
                    std::invalid_argument);
}

TEST_CASE("losses are permutation invariant over elements") {
    Rng rng(34);
    const Tensor logits = random_tensor({1, 6}, rng);
    const Tensor targets = random_targets({1, 6}, rng);
    Tensor logits_rev({1, 6}), targets_rev({1, 6});
    for (int i = 0; i < 6; ++i) {
        logits_rev.at(0, i) = logits.at(0, 5 - i);
        targets_rev.at(0, i) = targets.at(0, 5 - i);
    }
    CHECK(std::abs(focal_loss(logits, targets) - focal_loss(logits_rev, targets_rev)) < 1e-15);
    Tensor probs(logits.shape()), probs_rev(logits.shape());
    for (int i = 0; i < 6; ++i) {
        probs.at(0, i) = oracle::sigmoid(logits.at(0, i));
        probs_rev.at(0, i) = oracle::sigmoid(logits_rev.at(0, i));
    }
    CHECK(std::abs(bce_loss(probs, targets) - bce_loss(probs_rev, targets_rev)) < 1e-15);
}

TEST_CASE("uncertainty weighting closed forms") {
    CHECK(uncertainty_weighted_total({1.0, 2.0, 3.0}, {0.0, 0.0, 0.0}) == 6.0);
    CHECK(uncertainty_weighted_total({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}) == 3.0);
    const double ln2 = std::log(2.0);
    // exp(-ln 2) halves the second and third losses.
    CHECK(std::abs(uncertainty_weighted_total({1.0, 2.0, 3.0}, {0.0, ln2, ln2}) -
                   (1.0 + 1.0 + ln2 + 1.5 + ln2)) < 1e-12);

    Rng rng(35);
    for (int trial = 0; trial < 20; ++trial) {
        const std::array<double, 3> l = {rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0),
                                         rng.uniform(0.0, 5.0)};
        const std::array<double, 3> s = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                                         rng.uniform(-1.0, 1.0)};
        CHECK(std::abs(uncertainty_weighted_total(l, s) - oracle::uncertainty_total(l, s)) <
              1e-12);
    }
}

TEST_CASE("log-variance gradients follow the closed form") {
    ParameterStore store;
    init_loss_params(store);
    store.get("loss.s_sap").value.at(0) = 0.3;
    store.get("loss.s_tap").value.at(0) = -0.7;
    store.get("loss.s_reg").value.at(0) = 0.0;
    const std::array<double, 3> l = {0.9, 1.7, 0.05};

    std::array<Var, 3> losses = {constant(Tensor::scalar(l[0])), constant(Tensor::scalar(l[1])),
                                 constant(Tensor::scalar(l[2]))};
    Var total = uncertainty_weighted_total(losses, bind_loss_params(store));
    backward(total);

    const char* names[3] = {"loss.s_sap", "loss.s_tap", "loss.s_reg"};
    for (int i = 0; i < 3; ++i) {
        const double s = store.get(names[i]).value.at(0);
        const double expected = -std::exp(-s) * l[i] + 1.0;
        CHECK(std::abs(store.get(names[i]).grad.at(0) - expected) < 1e-12);
    }
}

TEST_CASE("loss gradients survive finite-difference checks") {
    Rng rng(36);
    ParameterStore store;
    store.create("logits", random_tensor({3, 4}, rng));
    store.create("probs", random_tensor({3, 4}, rng, 0.2, 0.8));
    store.create("pred", random_tensor({1, 4}, rng));
    init_loss_params(store);
    const Tensor targets = random_targets({3, 4}, rng);
    const Tensor reg_target = random_tensor({1, 4}, rng);

    auto loss_fn = [&store, &targets, &reg_target] {
        std::array<Var, 3> losses = {
            focal_loss(leaf(store.get("logits")), targets),
            bce_loss(leaf(store.get("probs")), targets),
            mse_loss(leaf(store.get("pred")), reg_target),
        };
        return uncertainty_weighted_total(losses, bind_loss_params(store));
    };
    const GradCheckReport report = grad_check(store, loss_fn);
    INFO("max rel err ", report.max_rel_err, " worst ", report.worst_param);
    CHECK(report.passed());
}
