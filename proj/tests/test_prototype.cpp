#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "stssdl/prototype.hpp"

using namespace stssdl;
using namespace stssdl::testing;

namespace {

PrototypeBank make_bank(const Tensor& prototypes) {
    PrototypeBank bank;
    bank.prototypes = leaf(prototypes);
    const std::size_t d = prototypes.cols();
    bank.query_proj_c = leaf(Tensor::zeros({d, d}));
    bank.query_proj_a = bank.query_proj_c;
    return bank;
}

}  // namespace

TEST_CASE("query projection basics") {
    Rng rng(1);
    const Tensor h = rng.normal_tensor({2, 3}, 1.0);
    Tensor eye({3, 3});
    for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;

    CHECK(max_abs_diff(project_query(leaf(h), leaf(eye))->value, h) == 0.0);
    CHECK(max_abs_diff(project_query(leaf(h), leaf(Tensor::zeros({3, 3})))->value,
                       Tensor::zeros({2, 3})) == 0.0);

    const Tensor proj = rng.normal_tensor({3, 2}, 1.0);
    CHECK(max_abs_diff(project_query(leaf(h), leaf(proj))->value, dense_mm(h, proj)) < 1e-14);
}

TEST_CASE("zero query yields uniform attention with tie-broken indices") {
    Rng rng(2);
    PrototypeBank bank = make_bank(rng.normal_tensor({5, 3}, 1.0));
    AttentionResult res = prototype_attention(leaf(Tensor::zeros({2, 3})), bank);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(res.alpha->value.at(i, j) == doctest::Approx(0.2).epsilon(1e-12));
        }
        CHECK(res.pos_idx[i] == 0);
        CHECK(res.neg_idx[i] == 1);
    }
}

TEST_CASE("two-prototype attention with log-2 logit gap") {
    // d=1, P = [[1],[0]], Q = [ln 2]: logits are (ln 2, 0), softmax (2/3, 1/3).
    PrototypeBank bank = make_bank(Tensor({2, 1}, {1.0, 0.0}));
    AttentionResult res = prototype_attention(leaf(Tensor({1, 1}, {std::log(2.0)})), bank);
    CHECK(res.alpha->value[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(res.alpha->value[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(res.pos_idx[0] == 0);
    CHECK(res.neg_idx[0] == 1);
}

TEST_CASE("ranking follows attention order") {
    // Logits chosen so softmax is (0.1, 0.5, 0.4) up to monotone mapping.
    PrototypeBank bank = make_bank(Tensor({3, 1}, {std::log(0.1), std::log(0.5), std::log(0.4)}));
    AttentionResult res = prototype_attention(leaf(Tensor({1, 1}, {1.0})), bank);
    CHECK(res.pos_idx[0] == 1);
    CHECK(res.neg_idx[0] == 2);
}

TEST_CASE("attention requires at least two prototypes") {
    PrototypeBank bank = make_bank(Tensor({1, 2}, {1.0, 2.0}));
    CHECK_THROWS_AS(prototype_attention(leaf(Tensor({1, 2})), bank), ContractError);
}

TEST_CASE("pos/neg ordering invariant over random instances") {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        Rng rng(seed);
        const std::size_t m = 2 + seed % 6, d = 1 + seed % 4, n = 1 + seed % 3;
        PrototypeBank bank = make_bank(rng.normal_tensor({m, d}, 1.0));
        AttentionResult res = prototype_attention(leaf(rng.normal_tensor({n, d}, 1.0)), bank);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t pos = res.pos_idx[i], neg = res.neg_idx[i];
            CHECK(pos != neg);
            CHECK(res.alpha->value.at(i, pos) >= res.alpha->value.at(i, neg));
            double sum = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                sum += res.alpha->value.at(i, j);
                if (j != pos && j != neg) {
                    CHECK(res.alpha->value.at(i, neg) >= res.alpha->value.at(i, j));
                }
            }
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("permuting prototypes permutes the selected indices") {
    Rng rng(321);
    const std::size_t m = 5, d = 3;
    const Tensor protos = rng.normal_tensor({m, d}, 1.0);
    const Tensor q = rng.normal_tensor({2, d}, 1.0);

    PrototypeBank bank = make_bank(protos);
    AttentionResult base = prototype_attention(leaf(q), bank);

    const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};  // new_index -> old_index
    Tensor permuted({m, d});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) permuted.at(i, j) = protos.at(perm[i], j);
    PrototypeBank bank2 = make_bank(permuted);
    AttentionResult moved = prototype_attention(leaf(q), bank2);

    std::vector<std::size_t> inverse(m);
    for (std::size_t i = 0; i < m; ++i) inverse[perm[i]] = i;
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(moved.pos_idx[i] == inverse[base.pos_idx[i]]);
        CHECK(moved.neg_idx[i] == inverse[base.neg_idx[i]]);
    }
}

TEST_CASE("aggregation is the alpha-weighted prototype sum") {
    Rng rng(4);
    PrototypeBank bank = make_bank(rng.normal_tensor({4, 3}, 1.0));
    const Tensor& p = bank.prototypes->value;

    Tensor onehot({1, 4}, {0.0, 0.0, 1.0, 0.0});
    auto v = aggregate_value(leaf(onehot), bank);
    for (std::size_t j = 0; j < 3; ++j) CHECK(v->value[j] == p.at(2, j));

    Tensor uniform({1, 4}, {0.25, 0.25, 0.25, 0.25});
    auto vu = aggregate_value(leaf(uniform), bank);
    for (std::size_t j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 4; ++i) mean += p.at(i, j) / 4.0;
        CHECK(vu->value[j] == doctest::Approx(mean).epsilon(1e-14));
    }

    const Tensor alpha = rng.uniform_tensor({3, 4}, 0.0, 1.0);
    CHECK(max_abs_diff(aggregate_value(leaf(alpha), bank)->value, dense_mm(alpha, p)) < 1e-14);
}

TEST_CASE("gathering prototypes picks rows and routes gradients to them") {
    Rng rng(5);
    PrototypeBank bank = make_bank(rng.normal_tensor({3, 2}, 1.0));
    const Tensor& p = bank.prototypes->value;

    auto zeros = gather_prototypes({0, 0, 0, 0}, bank);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t j = 0; j < 2; ++j) CHECK(zeros->value.at(r, j) == p.at(0, j));

    const std::vector<std::size_t> idx = {2, 0, 2};
    auto mixed = gather_prototypes(idx, bank);
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t j = 0; j < 2; ++j) CHECK(mixed->value.at(r, j) == p.at(idx[r], j));

    backward(mean_all(mixed));
    // Row 1 is never selected: its gradient stays exactly zero; selected
    // rows receive 1/numel per pick.
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(bank.prototypes->grad.at(0, j) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
        CHECK(bank.prototypes->grad.at(1, j) == 0.0);
        CHECK(bank.prototypes->grad.at(2, j) == doctest::Approx(2.0 / 6.0).epsilon(1e-14));
    }
}

TEST_CASE("attention plus aggregation passes finite differences") {
    const std::size_t n = 2, m = 3, d = 2;
    Rng fixed(99);
    const Tensor mix = fixed.normal_tensor({n, d}, 1.0);

    GraphFn f = [&](const std::vector<NodePtr>& in) {
        PrototypeBank bank{in[1], in[2], in[2]};
        NodePtr q = project_query(in[0], in[2]);
        AttentionResult att = prototype_attention(q, bank);
        return mean_all(mul(aggregate_value(att.alpha, bank), constant(mix)));
    };

    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 500);
        worst = std::max(worst, max_fd_rel_err(f, {rng.normal_tensor({n, d}, 1.0),
                                                   rng.normal_tensor({m, d}, 1.0),
                                                   rng.normal_tensor({d, d}, 1.0)}));
    }
    CHECK(worst < 1e-4);
}
