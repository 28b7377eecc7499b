#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "vf/error.hpp"
#include "vf/metrics.hpp"
#include "vf/models.hpp"
#include "vf/rng.hpp"

using namespace vf;

namespace {

std::vector<double> rand_vec(Rng& r, size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = r.uniform(lo, hi);
    return v;
}

std::vector<Sample> random_batch(Rng& r, const ModelSpec& spec, size_t n) {
    std::vector<Sample> out;
    for (size_t i = 0; i < n; ++i) {
        Sample s;
        s.seq = rand_vec(r, spec.seq_len * spec.channels);
        if (spec.fusion == FusionKind::waveform) s.wf = rand_vec(r, spec.wf_dim);
        s.label = i % 2 == 0 ? 1 : 0;
        out.push_back(std::move(s));
    }
    return out;
}

// Central finite differences at `coords` random coordinates.
double max_grad_rel_err(const ModelSpec& spec, Rng& r, size_t coords) {
    auto batch = random_batch(r, spec, 6);
    std::vector<double> theta = rand_vec(r, spec.param_count(), -0.5, 0.5);
    std::vector<size_t> idx(batch.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    std::vector<double> grad(theta.size(), 0.0);
    const double l2 = 0.01;
    (void)loss_grad_batch(spec, theta, batch, idx, l2, grad);

    const double eps = 1e-5;
    double worst = 0.0;
    std::vector<double> dummy(theta.size());
    for (size_t trial = 0; trial < coords; ++trial) {
        const size_t j = r.below(theta.size());
        const double keep = theta[j];
        theta[j] = keep + eps;
        const double up = loss_grad_batch(spec, theta, batch, idx, l2, dummy);
        theta[j] = keep - eps;
        const double dn = loss_grad_batch(spec, theta, batch, idx, l2, dummy);
        theta[j] = keep;
        const double fd = (up - dn) / (2.0 * eps);
        const double rel = std::abs(fd - grad[j]) / std::max(std::abs(fd) + std::abs(grad[j]), 1e-8);
        worst = std::max(worst, rel);
    }
    return worst;
}

// Plain translation of the gate equations, scalar loops only.
std::vector<double> lstm_scalar_oracle(const LstmParams& p, const std::vector<double>& seq, size_t T) {
    const size_t D = p.input_dim, H = p.hidden;
    const size_t stride = H * D + H * H + H;
    auto W = [&](size_t g, size_t r, size_t c) { return p.theta[g * stride + r * D + c]; };
    auto U = [&](size_t g, size_t r, size_t c) { return p.theta[g * stride + H * D + r * H + c]; };
    auto B = [&](size_t g, size_t r) { return p.theta[g * stride + H * D + H * H + r]; };
    std::vector<double> h(H, 0.0), c(H, 0.0), out;
    for (size_t t = 0; t < T; ++t) {
        std::vector<double> zi(H), zf(H), zg(H), zo(H);
        for (size_t g = 0; g < 4; ++g) {
            for (size_t r = 0; r < H; ++r) {
                double acc = B(g, r);
                for (size_t cc = 0; cc < D; ++cc) acc += W(g, r, cc) * seq[t * D + cc];
                for (size_t cc = 0; cc < H; ++cc) acc += U(g, r, cc) * h[cc];
                (g == 0 ? zi : g == 1 ? zf : g == 2 ? zg : zo)[r] = acc;
            }
        }
        for (size_t r = 0; r < H; ++r) {
            const double iv = 1.0 / (1.0 + std::exp(-zi[r]));
            const double fv = 1.0 / (1.0 + std::exp(-zf[r]));
            const double gv = std::tanh(zg[r]);
            const double ov = 1.0 / (1.0 + std::exp(-zo[r]));
            c[r] = fv * c[r] + iv * gv;
            h[r] = ov * std::tanh(c[r]);
        }
        out.insert(out.end(), h.begin(), h.end());
    }
    return out;
}

} // namespace

TEST_CASE("logreg_forward") {
    const std::vector<double> zero(4, 0.0);
    CHECK(logreg_forward(zero, 0.0, {zero.data(), 4}) == 0.5);

    // Saturation clamps without NaN.
    const std::vector<double> w{100.0};
    const std::vector<double> x{1.0};
    CHECK(logreg_forward(w, 0.0, x) > 1.0 - 1e-12);
    CHECK(logreg_forward(w, -200.0, x) < 1e-12);
    CHECK(std::isfinite(logreg_forward(w, 1e6, x)));

    SUBCASE("matches the scalar-loop oracle") {
        Rng r(71);
        for (int trial = 0; trial < 50; ++trial) {
            const size_t d = 1 + r.below(32);
            const auto w2 = rand_vec(r, d);
            const auto x2 = rand_vec(r, d);
            const double b = r.uniform(-1, 1);
            double z = b;
            for (size_t i = 0; i < d; ++i) z += w2[i] * x2[i];
            const double expect = 1.0 / (1.0 + std::exp(-z));
            CHECK(std::abs(logreg_forward(w2, b, x2) - expect) <= 1e-15);
        }
    }
    CHECK_THROWS_AS((void)logreg_forward(zero, 0.0, {zero.data(), 2}), VfError);
}

TEST_CASE("batch loss at zero parameters is ln 2") {
    ModelSpec spec;
    spec.kind = ModelKind::logreg;
    spec.fusion = FusionKind::none;
    spec.seq_len = 3;
    spec.channels = 2;
    Rng r(72);
    const auto batch = random_batch(r, spec, 8);
    std::vector<double> theta(spec.param_count(), 0.0);
    std::vector<double> grad(theta.size());
    std::vector<size_t> idx{0, 1, 2, 3, 4, 5, 6, 7};
    const double loss = loss_grad_batch(spec, theta, batch, idx, 0.0, grad);
    CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("gradients agree with central finite differences") {
    Rng r(73);
    SUBCASE("logreg") {
        ModelSpec spec{ModelKind::logreg, FusionKind::none, 5, 3};
        CHECK(max_grad_rel_err(spec, r, 20) < 1e-4);
    }
    SUBCASE("logreg fused") {
        ModelSpec spec{ModelKind::logreg, FusionKind::waveform, 5, 3};
        CHECK(max_grad_rel_err(spec, r, 20) < 1e-4);
    }
    SUBCASE("standard lstm") {
        ModelSpec spec{ModelKind::lstm, FusionKind::none, 5, 3, 4};
        CHECK(max_grad_rel_err(spec, r, 20) < 1e-4);
    }
    SUBCASE("standard lstm fused") {
        ModelSpec spec{ModelKind::lstm, FusionKind::waveform, 5, 3, 4};
        CHECK(max_grad_rel_err(spec, r, 20) < 1e-4);
    }
    SUBCASE("channelwise") {
        ModelSpec spec{ModelKind::channelwise, FusionKind::none, 5, 3, 4, 2};
        CHECK(max_grad_rel_err(spec, r, 20) < 1e-4);
    }
    SUBCASE("channelwise fused") {
        ModelSpec spec{ModelKind::channelwise, FusionKind::waveform, 5, 3, 4, 2};
        CHECK(max_grad_rel_err(spec, r, 20) < 1e-4);
    }
}

TEST_CASE("lstm_forward") {
    SUBCASE("all-zero parameters give identically zero hiddens") {
        const auto p = make_lstm_params(2, 3);
        const std::vector<double> seq{0.5, -0.3, 1.0, 0.2, -0.7, 0.9};
        for (const double h : lstm_forward(p, seq, 3)) CHECK(h == 0.0);
    }
    SUBCASE("T=1 equals a single cell step and matches the oracle") {
        Rng r(74);
        LstmParams p = make_lstm_params(2, 2);
        p.theta = rand_vec(r, p.theta.size());
        const auto seq = rand_vec(r, 2);
        const auto got = lstm_forward(p, seq, 1);
        const auto expect = lstm_scalar_oracle(p, seq, 1);
        for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
    SUBCASE("random T=3 sequence matches the scalar recurrence oracle") {
        Rng r(75);
        for (int trial = 0; trial < 20; ++trial) {
            LstmParams p = make_lstm_params(2, 2);
            p.theta = rand_vec(r, p.theta.size());
            const auto seq = rand_vec(r, 6);
            const auto got = lstm_forward(p, seq, 3);
            const auto expect = lstm_scalar_oracle(p, seq, 3);
            REQUIRE(got.size() == expect.size());
            for (size_t i = 0; i < got.size(); ++i)
                CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
        }
    }
    SUBCASE("hidden states stay inside (-1, 1)") {
        Rng r(76);
        LstmParams p = make_lstm_params(3, 5);
        p.theta = rand_vec(r, p.theta.size(), -3.0, 3.0);
        const auto seq = rand_vec(r, 3 * 40, -5.0, 5.0);
        for (const double h : lstm_forward(p, seq, 40)) {
            CHECK(h > -1.0);
            CHECK(h < 1.0);
        }
    }
}

TEST_CASE("channelwise_forward") {
    SUBCASE("zero parameters give zero output") {
        const auto p = make_channelwise_params(3, 2, 4);
        const std::vector<double> seq(3 * 5, 0.7);
        for (const double h : channelwise_forward(p, seq, 5)) CHECK(h == 0.0);
    }
    SUBCASE("K=1 reduces to a stacked two-layer lstm") {
        Rng r(77);
        ChannelwiseParams p = make_channelwise_params(1, 3, 4);
        p.theta = rand_vec(r, p.theta.size());
        const size_t T = 6;
        const auto seq = rand_vec(r, T);

        LstmParams lower = make_lstm_params(1, 3);
        std::copy(p.theta.begin(), p.theta.begin() + static_cast<long>(lower.theta.size()),
                  lower.theta.begin());
        LstmParams upper = make_lstm_params(3, 4);
        std::copy(p.theta.begin() + static_cast<long>(lower.theta.size()), p.theta.end(),
                  upper.theta.begin());

        const auto hidden = lstm_forward(lower, seq, T);
        const auto top = lstm_forward(upper, hidden, T);
        const auto got = channelwise_forward(p, seq, T);
        for (size_t i = 0; i < 4; ++i)
            CHECK(got[i] == doctest::Approx(top[(T - 1) * 4 + i]).epsilon(1e-12));
    }
    SUBCASE("channel permutation with matching top-layer column permutation is exact") {
        Rng r(78);
        const size_t K = 3, h = 2, H = 4, T = 5;
        ChannelwiseParams a = make_channelwise_params(K, h, H);
        a.theta = rand_vec(r, a.theta.size());
        const auto seq = rand_vec(r, T * K);

        // Permutation pi: channel c of the permuted net is channel pi[c] of the
        // original.
        const std::vector<size_t> pi{2, 0, 1};
        ChannelwiseParams b = make_channelwise_params(K, h, H);
        const size_t blk = LstmParams::size_for(1, h);
        for (size_t c = 0; c < K; ++c)
            std::copy(a.theta.begin() + static_cast<long>(pi[c] * blk),
                      a.theta.begin() + static_cast<long>((pi[c] + 1) * blk),
                      b.theta.begin() + static_cast<long>(c * blk));
        // Top block: permute the K column-blocks (width h) of each gate's W.
        const size_t top_base = K * blk;
        const size_t D2 = K * h;
        const size_t stride = H * D2 + H * H + H;
        std::copy(a.theta.begin() + static_cast<long>(top_base), a.theta.end(),
                  b.theta.begin() + static_cast<long>(top_base));
        for (size_t g = 0; g < 4; ++g) {
            for (size_t row = 0; row < H; ++row) {
                for (size_t c = 0; c < K; ++c) {
                    for (size_t j = 0; j < h; ++j) {
                        b.theta[top_base + g * stride + row * D2 + c * h + j] =
                            a.theta[top_base + g * stride + row * D2 + pi[c] * h + j];
                    }
                }
            }
        }
        std::vector<double> seq_perm(T * K);
        for (size_t t = 0; t < T; ++t)
            for (size_t c = 0; c < K; ++c) seq_perm[t * K + c] = seq[t * K + pi[c]];

        const auto out_a = channelwise_forward(a, seq, T);
        const auto out_b = channelwise_forward(b, seq_perm, T);
        for (size_t i = 0; i < H; ++i) CHECK(out_b[i] == doctest::Approx(out_a[i]).epsilon(1e-12));
    }
}

TEST_CASE("fusion wiring") {
    Rng r(79);
    const size_t T = 4, K = 3, H = 4, F = 8, W = 13;

    ModelSpec fused{ModelKind::lstm, FusionKind::waveform, T, K, H, 4, W, F};
    ModelSpec plain{ModelKind::lstm, FusionKind::none, T, K, H};

    SUBCASE("zero waveform branch reproduces the base path exactly") {
        auto theta_f = init_params(fused, 5);
        // Zero the waveform dense and its head slice; mirror the shared part.
        const size_t lstm_size = LstmParams::size_for(K, H);
        std::vector<double> theta_p(plain.param_count(), 0.0);
        std::copy(theta_f.begin(), theta_f.begin() + static_cast<long>(lstm_size), theta_p.begin());
        // fused layout: [lstm][Wwf F*W][bwf F][Vh H][Vu F][b]
        const size_t wf_block = F * W + F;
        for (size_t i = 0; i < wf_block; ++i) theta_f[lstm_size + i] = 0.0;
        for (size_t i = 0; i < H; ++i) theta_p[lstm_size + i] = theta_f[lstm_size + wf_block + i];
        for (size_t i = 0; i < F; ++i) theta_f[lstm_size + wf_block + H + i] = 0.0; // Vu
        theta_p[lstm_size + H] = theta_f[lstm_size + wf_block + H + F]; // bias

        std::vector<std::pair<double, double>> scores;
        for (int trial = 0; trial < 30; ++trial) {
            Sample s;
            s.seq = rand_vec(r, T * K);
            s.wf = rand_vec(r, W);
            const double pf = forward_prob(fused, theta_f, s);
            Sample s2 = s;
            s2.wf.clear();
            const double pp = forward_prob(plain, theta_p, s2);
            CHECK(pf == pp); // bitwise: same operations on the shared path
            scores.emplace_back(pf, pp);
        }
        // Ranking identity follows from equality.
        std::vector<size_t> by_f(scores.size()), by_p(scores.size());
        for (size_t i = 0; i < scores.size(); ++i) by_f[i] = by_p[i] = i;
        std::sort(by_f.begin(), by_f.end(), [&](size_t a, size_t b) { return scores[a].first < scores[b].first; });
        std::sort(by_p.begin(), by_p.end(), [&](size_t a, size_t b) { return scores[a].second < scores[b].second; });
        CHECK(by_f == by_p);
    }
    SUBCASE("zero base parameters leave only the waveform branch") {
        std::vector<double> theta(fused.param_count(), 0.0);
        Rng rr(80);
        const size_t lstm_size = LstmParams::size_for(K, H);
        for (size_t i = lstm_size; i < theta.size(); ++i) theta[i] = rr.uniform(-1, 1);
        for (size_t i = 0; i < H; ++i) theta[lstm_size + F * W + F + i] = 0.0; // Vh = 0 too

        Sample s1, s2, s3;
        s1.seq = rand_vec(r, T * K);
        s2.seq = rand_vec(r, T * K);
        s3.seq = s1.seq;
        s1.wf = rand_vec(r, W);
        s2.wf = s1.wf;
        s3.wf = rand_vec(r, W);
        CHECK(forward_prob(fused, theta, s1) == forward_prob(fused, theta, s2)); // seq ignored
        CHECK(forward_prob(fused, theta, s1) != forward_prob(fused, theta, s3)); // wf matters
    }
    SUBCASE("full forward matches a composed scalar oracle") {
        auto theta = rand_vec(r, fused.param_count(), -0.6, 0.6);
        for (int trial = 0; trial < 10; ++trial) {
            Sample s;
            s.seq = rand_vec(r, T * K);
            s.wf = rand_vec(r, W);

            LstmParams lp = make_lstm_params(K, H);
            std::copy(theta.begin(), theta.begin() + static_cast<long>(lp.theta.size()), lp.theta.begin());
            const auto hseq = lstm_scalar_oracle(lp, s.seq, T);
            const size_t base = lp.theta.size();
            double z = theta[base + F * W + F + H + F];
            for (size_t i = 0; i < F; ++i) {
                double u = theta[base + F * W + i]; // bwf[i]
                for (size_t j = 0; j < W; ++j) u += theta[base + i * W + j] * s.wf[j];
                u = std::max(0.0, u);
                z += theta[base + F * W + F + H + i] * u;
            }
            for (size_t i = 0; i < H; ++i) z += theta[base + F * W + F + i] * hseq[(T - 1) * H + i];
            const double expect = 1.0 / (1.0 + std::exp(-std::clamp(z, -40.0, 40.0)));
            CHECK(forward_prob(fused, theta, s) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("train") {
    SUBCASE("learning rate zero leaves parameters unchanged") {
        ModelSpec spec{ModelKind::lstm, FusionKind::none, 4, 2, 3};
        Rng r(81);
        auto data = random_batch(r, spec, 10);
        TrainConfig cfg;
        cfg.lr = 0.0;
        cfg.epochs = 3;
        cfg.seed = 9;
        cfg.patience = 100;
        const auto res = train(spec, data, data, cfg);
        CHECK(res.theta == init_params(spec, 9));
    }
    SUBCASE("logreg separable toy set reaches training AUC 1.0 within 20 epochs") {
        ModelSpec spec{ModelKind::logreg, FusionKind::none, 1, 2};
        Rng r(82);
        std::vector<Sample> data;
        for (int i = 0; i < 40; ++i) {
            Sample s;
            const double margin = i % 2 == 0 ? 1.0 : -1.0;
            s.seq = {r.uniform(0.2, 1.2) * margin, r.uniform(0.2, 1.2) * margin};
            s.label = margin > 0 ? 1 : 0;
            data.push_back(std::move(s));
        }
        TrainConfig cfg;
        cfg.lr = 0.5;
        cfg.epochs = 20;
        cfg.l2 = 0.0;
        cfg.seed = 4;
        cfg.patience = 100;
        const auto res = train(spec, data, data, cfg);
        ScoredSet scored;
        for (const auto& s : data) {
            scored.scores.push_back(forward_prob(spec, res.theta, s));
            scored.labels.push_back(s.label);
        }
        CHECK(auc_roc(scored) == 1.0);
    }
    SUBCASE("same seed twice gives a bit-identical history") {
        ModelSpec spec{ModelKind::lstm, FusionKind::none, 4, 2, 3};
        Rng r(83);
        auto data = random_batch(r, spec, 16);
        auto val = random_batch(r, spec, 8);
        TrainConfig cfg;
        cfg.epochs = 6;
        cfg.seed = 77;
        const auto a = train(spec, data, val, cfg);
        const auto b = train(spec, data, val, cfg);
        REQUIRE(a.history.size() == b.history.size());
        for (size_t i = 0; i < a.history.size(); ++i) {
            CHECK(a.history[i].train_loss == b.history[i].train_loss);
            CHECK(a.history[i].val_auc == b.history[i].val_auc);
        }
        CHECK(a.theta == b.theta);
    }
    SUBCASE("single-class training set is rejected") {
        ModelSpec spec{ModelKind::logreg, FusionKind::none, 1, 2};
        std::vector<Sample> data(4);
        for (auto& s : data) {
            s.seq = {0.1, 0.2};
            s.label = 0;
        }
        CHECK_THROWS_AS((void)train(spec, data, data, TrainConfig{}), VfError);
    }
}
