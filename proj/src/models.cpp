#include "vf/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "vf/error.hpp"
#include "vf/kernels.hpp"
#include "vf/metrics.hpp"
#include "vf/rng.hpp"

namespace vf {

namespace {

constexpr double LOGIT_CLIP = 40.0;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// ---- flat parameter layout ----------------------------------------------

struct LstmLayout {
    size_t base = 0, D = 0, H = 0;

    size_t gate_stride() const { return H * D + H * H + H; }
    size_t W(size_t g) const { return base + g * gate_stride(); }
    size_t U(size_t g) const { return W(g) + H * D; }
    size_t b(size_t g) const { return U(g) + H * H; }
    size_t size() const { return 4 * gate_stride(); }
};

struct Offsets {
    // lstm kind
    LstmLayout base_lstm;
    // channelwise kind
    std::vector<LstmLayout> ch;
    LstmLayout top;
    // fusion branch
    size_t wf_W = 0, wf_b = 0;
    // head
    size_t head_Vh = 0, head_Vu = 0, head_b = 0;
    // logreg
    size_t lr_w = 0, lr_b = 0, lr_dim = 0;

    size_t total = 0;
    size_t final_hidden = 0; // width feeding the head
};

Offsets layout(const ModelSpec& s) {
    Offsets o;
    size_t at = 0;
    if (s.kind == ModelKind::logreg) {
        o.lr_dim = s.seq_len * s.channels + (s.fusion == FusionKind::waveform ? s.wf_dim : 0);
        o.lr_w = at;
        at += o.lr_dim;
        o.lr_b = at;
        at += 1;
        o.total = at;
        return o;
    }
    if (s.kind == ModelKind::lstm) {
        o.base_lstm = {at, s.channels, s.hidden};
        at += o.base_lstm.size();
        o.final_hidden = s.hidden;
    } else {
        o.ch.resize(s.channels);
        for (size_t c = 0; c < s.channels; ++c) {
            o.ch[c] = {at, 1, s.channel_hidden};
            at += o.ch[c].size();
        }
        o.top = {at, s.channels * s.channel_hidden, s.hidden};
        at += o.top.size();
        o.final_hidden = s.hidden;
    }
    if (s.fusion == FusionKind::waveform) {
        o.wf_W = at;
        at += s.wf_dense * s.wf_dim;
        o.wf_b = at;
        at += s.wf_dense;
    }
    o.head_Vh = at;
    at += o.final_hidden;
    if (s.fusion == FusionKind::waveform) {
        o.head_Vu = at;
        at += s.wf_dense;
    }
    o.head_b = at;
    at += 1;
    o.total = at;
    return o;
}

// Weight (non-bias) segments, for L2 and initialization.
template <class Fn>
void for_each_weight_segment(const ModelSpec& s, const Offsets& o, Fn fn) {
    auto lstm_segments = [&](const LstmLayout& l) {
        for (size_t g = 0; g < 4; ++g) {
            fn(l.W(g), l.H * l.D, l.D + l.H);
            fn(l.U(g), l.H * l.H, l.D + l.H);
        }
    };
    if (s.kind == ModelKind::logreg) {
        fn(o.lr_w, o.lr_dim, o.lr_dim);
        return;
    }
    if (s.kind == ModelKind::lstm) {
        lstm_segments(o.base_lstm);
    } else {
        for (const auto& l : o.ch) lstm_segments(l);
        lstm_segments(o.top);
    }
    if (s.fusion == FusionKind::waveform) fn(o.wf_W, s.wf_dense * s.wf_dim, s.wf_dim);
    fn(o.head_Vh, o.final_hidden, o.final_hidden + (s.fusion == FusionKind::waveform ? s.wf_dense : 0));
    if (s.fusion == FusionKind::waveform)
        fn(o.head_Vu, s.wf_dense, o.final_hidden + s.wf_dense);
}

// ---- LSTM core ------------------------------------------------------------

struct LstmCache {
    size_t T = 0, H = 0;
    std::vector<double> i, f, g, o, c, tc, h;

    void resize(size_t t, size_t hh) {
        T = t;
        H = hh;
        for (auto* v : {&i, &f, &g, &o, &c, &tc, &h}) v->assign(t * hh, 0.0);
    }
    const double* final_hidden() const { return h.data() + (T - 1) * H; }
};

void lstm_fwd(const double* th, const LstmLayout& L, const double* x, size_t T, LstmCache& cc) {
    const size_t D = L.D, H = L.H;
    cc.resize(T, H);
    std::vector<double> z(4 * H);
    const double* h_prev = nullptr;
    const double* c_prev = nullptr;
    for (size_t t = 0; t < T; ++t) {
        const double* xt = x + t * D;
        for (size_t gate = 0; gate < 4; ++gate) {
            const double* W = th + L.W(gate);
            const double* U = th + L.U(gate);
            const double* b = th + L.b(gate);
            double* zg = z.data() + gate * H;
            for (size_t r = 0; r < H; ++r) {
                double acc = b[r] + kernels::dot(W + r * D, xt, D);
                if (h_prev != nullptr) acc += kernels::dot(U + r * H, h_prev, H);
                zg[r] = acc;
            }
        }
        double* it = cc.i.data() + t * H;
        double* ft = cc.f.data() + t * H;
        double* gt = cc.g.data() + t * H;
        double* ot = cc.o.data() + t * H;
        double* ct = cc.c.data() + t * H;
        double* tct = cc.tc.data() + t * H;
        double* ht = cc.h.data() + t * H;
        for (size_t r = 0; r < H; ++r) {
            it[r] = sigmoid(z[0 * H + r]);
            ft[r] = sigmoid(z[1 * H + r]);
            gt[r] = std::tanh(z[2 * H + r]);
            ot[r] = sigmoid(z[3 * H + r]);
            const double cp = c_prev != nullptr ? c_prev[r] : 0.0;
            ct[r] = ft[r] * cp + it[r] * gt[r];
            tct[r] = std::tanh(ct[r]);
            ht[r] = ot[r] * tct[r];
        }
        h_prev = ht;
        c_prev = ct;
    }
}

// dh_seq is T x H upstream gradient on the hidden sequence; dth accumulates
// parameter gradients; dx (T x D) is optional.
void lstm_bwd(const double* th, const LstmLayout& L, const double* x, size_t T, const LstmCache& cc,
              const double* dh_seq, double* dth, double* dx) {
    const size_t D = L.D, H = L.H;
    std::vector<double> dh_carry(H, 0.0), dc_carry(H, 0.0);
    std::vector<double> dz(4 * H);
    for (size_t tt = T; tt-- > 0;) {
        const double* xt = x + tt * D;
        const double* it = cc.i.data() + tt * H;
        const double* ft = cc.f.data() + tt * H;
        const double* gt = cc.g.data() + tt * H;
        const double* ot = cc.o.data() + tt * H;
        const double* tct = cc.tc.data() + tt * H;
        const double* c_prev = tt > 0 ? cc.c.data() + (tt - 1) * H : nullptr;
        const double* h_prev = tt > 0 ? cc.h.data() + (tt - 1) * H : nullptr;

        for (size_t r = 0; r < H; ++r) {
            const double dh = dh_seq[tt * H + r] + dh_carry[r];
            const double dO = dh * tct[r];
            const double dc = dc_carry[r] + dh * ot[r] * (1.0 - tct[r] * tct[r]);
            const double cp = c_prev != nullptr ? c_prev[r] : 0.0;
            dz[0 * H + r] = dc * gt[r] * it[r] * (1.0 - it[r]);          // input gate
            dz[1 * H + r] = dc * cp * ft[r] * (1.0 - ft[r]);             // forget gate
            dz[2 * H + r] = dc * it[r] * (1.0 - gt[r] * gt[r]);          // candidate
            dz[3 * H + r] = dO * ot[r] * (1.0 - ot[r]);                  // output gate
            dc_carry[r] = dc * ft[r];
        }
        std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
        if (dx != nullptr) std::fill(dx + tt * D, dx + (tt + 1) * D, 0.0);

        for (size_t gate = 0; gate < 4; ++gate) {
            const double* U = th + L.U(gate);
            const double* W = th + L.W(gate);
            double* dW = dth + L.W(gate);
            double* dU = dth + L.U(gate);
            double* db = dth + L.b(gate);
            const double* dzg = dz.data() + gate * H;
            for (size_t r = 0; r < H; ++r) {
                const double d = dzg[r];
                if (d == 0.0) continue;
                kernels::axpy(d, xt, dW + r * D, D);
                if (h_prev != nullptr) {
                    kernels::axpy(d, h_prev, dU + r * H, H);
                    kernels::axpy(d, U + r * H, dh_carry.data(), H);
                }
                db[r] += d;
                if (dx != nullptr) kernels::axpy(d, W + r * D, dx + tt * D, D);
            }
        }
    }
}

// ---- full-network forward/backward ---------------------------------------

struct FwdCache {
    LstmCache base;
    std::vector<LstmCache> ch;
    std::vector<double> ch_in;  // T per channel, reused
    std::vector<double> concat; // T x K*h
    LstmCache top;
    std::vector<double> u_pre, u; // F
    double z = 0.0, p = 0.0;
};

void check_sample(const ModelSpec& s, const Sample& smp) {
    if (smp.seq.size() != s.seq_len * s.channels)
        fail(Errc::dimension_mismatch, "sequence length mismatch");
    if (s.fusion == FusionKind::waveform && smp.wf.size() != s.wf_dim)
        fail(Errc::dimension_mismatch, "waveform feature width mismatch");
}

double forward_all(const ModelSpec& s, const Offsets& o, const double* th, const Sample& smp,
                   FwdCache& fc) {
    check_sample(s, smp);
    const size_t T = s.seq_len;

    if (s.kind == ModelKind::logreg) {
        double z = th[o.lr_b] + kernels::dot(th + o.lr_w, smp.seq.data(), smp.seq.size());
        if (s.fusion == FusionKind::waveform)
            z += kernels::dot(th + o.lr_w + smp.seq.size(), smp.wf.data(), s.wf_dim);
        fc.z = std::clamp(z, -LOGIT_CLIP, LOGIT_CLIP);
        fc.p = sigmoid(fc.z);
        return fc.p;
    }

    const double* hT = nullptr;
    if (s.kind == ModelKind::lstm) {
        lstm_fwd(th, o.base_lstm, smp.seq.data(), T, fc.base);
        hT = fc.base.final_hidden();
    } else {
        const size_t K = s.channels, hh = s.channel_hidden;
        fc.ch.resize(K);
        fc.concat.assign(T * K * hh, 0.0);
        fc.ch_in.resize(T);
        for (size_t c = 0; c < K; ++c) {
            for (size_t t = 0; t < T; ++t) fc.ch_in[t] = smp.seq[t * K + c];
            lstm_fwd(th, o.ch[c], fc.ch_in.data(), T, fc.ch[c]);
            for (size_t t = 0; t < T; ++t)
                std::memcpy(fc.concat.data() + t * K * hh + c * hh, fc.ch[c].h.data() + t * hh,
                            hh * sizeof(double));
        }
        lstm_fwd(th, o.top, fc.concat.data(), T, fc.top);
        hT = fc.top.final_hidden();
    }

    double z = th[o.head_b] + kernels::dot(th + o.head_Vh, hT, o.final_hidden);
    if (s.fusion == FusionKind::waveform) {
        const size_t F = s.wf_dense;
        fc.u_pre.resize(F);
        fc.u.resize(F);
        for (size_t r = 0; r < F; ++r) {
            fc.u_pre[r] = th[o.wf_b + r] + kernels::dot(th + o.wf_W + r * s.wf_dim, smp.wf.data(), s.wf_dim);
            fc.u[r] = std::max(0.0, fc.u_pre[r]);
        }
        z += kernels::dot(th + o.head_Vu, fc.u.data(), F);
    }
    fc.z = std::clamp(z, -LOGIT_CLIP, LOGIT_CLIP);
    fc.p = sigmoid(fc.z);
    return fc.p;
}

void backward_all(const ModelSpec& s, const Offsets& o, const double* th, const Sample& smp,
                  const FwdCache& fc, double dz, double* grad) {
    const size_t T = s.seq_len;

    if (s.kind == ModelKind::logreg) {
        kernels::axpy(dz, smp.seq.data(), grad + o.lr_w, smp.seq.size());
        if (s.fusion == FusionKind::waveform)
            kernels::axpy(dz, smp.wf.data(), grad + o.lr_w + smp.seq.size(), s.wf_dim);
        grad[o.lr_b] += dz;
        return;
    }

    const double* hT = s.kind == ModelKind::lstm ? fc.base.final_hidden() : fc.top.final_hidden();
    kernels::axpy(dz, hT, grad + o.head_Vh, o.final_hidden);
    grad[o.head_b] += dz;

    if (s.fusion == FusionKind::waveform) {
        const size_t F = s.wf_dense;
        kernels::axpy(dz, fc.u.data(), grad + o.head_Vu, F);
        for (size_t r = 0; r < F; ++r) {
            if (fc.u_pre[r] <= 0.0) continue;
            const double du = dz * th[o.head_Vu + r];
            kernels::axpy(du, smp.wf.data(), grad + o.wf_W + r * s.wf_dim, s.wf_dim);
            grad[o.wf_b + r] += du;
        }
    }

    // Head gradient enters the recurrent stack through the final hidden state.
    std::vector<double> dh_seq(T * s.hidden, 0.0);
    for (size_t r = 0; r < s.hidden; ++r) dh_seq[(T - 1) * s.hidden + r] = dz * th[o.head_Vh + r];

    if (s.kind == ModelKind::lstm) {
        lstm_bwd(th, o.base_lstm, smp.seq.data(), T, fc.base, dh_seq.data(), grad, nullptr);
        return;
    }

    const size_t K = s.channels, hh = s.channel_hidden;
    std::vector<double> dconcat(T * K * hh, 0.0);
    lstm_bwd(th, o.top, fc.concat.data(), T, fc.top, dh_seq.data(), grad, dconcat.data());

    std::vector<double> dh_c(T * hh);
    std::vector<double> ch_in(T);
    for (size_t c = 0; c < K; ++c) {
        for (size_t t = 0; t < T; ++t) {
            std::memcpy(dh_c.data() + t * hh, dconcat.data() + t * K * hh + c * hh, hh * sizeof(double));
            ch_in[t] = smp.seq[t * K + c];
        }
        lstm_bwd(th, o.ch[c], ch_in.data(), T, fc.ch[c], dh_c.data(), grad, nullptr);
    }
}

} // namespace

// ---- public surface --------------------------------------------------------

const char* model_kind_name(ModelKind k) {
    switch (k) {
    case ModelKind::logreg: return "logreg";
    case ModelKind::lstm: return "lstm";
    case ModelKind::channelwise: return "channelwise";
    }
    return "?";
}

const char* fusion_kind_name(FusionKind f) { return f == FusionKind::none ? "none" : "waveform"; }

ModelKind parse_model_kind(const std::string& s) {
    if (s == "logreg") return ModelKind::logreg;
    if (s == "lstm") return ModelKind::lstm;
    if (s == "channelwise") return ModelKind::channelwise;
    fail(Errc::invalid_config, "unknown model kind '" + s + "'");
}

FusionKind parse_fusion_kind(const std::string& s) {
    if (s == "none") return FusionKind::none;
    if (s == "waveform") return FusionKind::waveform;
    fail(Errc::invalid_config, "unknown fusion kind '" + s + "'");
}

size_t ModelSpec::param_count() const { return layout(*this).total; }

std::vector<double> init_params(const ModelSpec& spec, uint64_t seed) {
    const Offsets o = layout(spec);
    std::vector<double> theta(o.total, 0.0);
    if (spec.kind == ModelKind::logreg) return theta; // zero start, convex problem

    Rng rng(derive_seed(seed, 0x1417));
    for_each_weight_segment(spec, o, [&](size_t off, size_t len, size_t fan_in) {
        const double s = 1.0 / std::sqrt(static_cast<double>(std::max<size_t>(fan_in, 1)));
        for (size_t i = 0; i < len; ++i) theta[off + i] = rng.uniform(-s, s);
    });

    // Forget-gate bias 1.0.
    auto set_forget = [&](const LstmLayout& l) {
        for (size_t r = 0; r < l.H; ++r) theta[l.b(1) + r] = 1.0;
    };
    if (spec.kind == ModelKind::lstm) {
        set_forget(o.base_lstm);
    } else {
        for (const auto& l : o.ch) set_forget(l);
        set_forget(o.top);
    }
    return theta;
}

double forward_prob(const ModelSpec& spec, std::span<const double> theta, const Sample& s) {
    const Offsets o = layout(spec);
    if (theta.size() != o.total) fail(Errc::dimension_mismatch, "parameter vector size mismatch");
    FwdCache fc;
    return forward_all(spec, o, theta.data(), s, fc);
}

double loss_grad_batch(const ModelSpec& spec, std::span<const double> theta,
                       const std::vector<Sample>& data, std::span<const size_t> idx, double l2,
                       std::span<double> grad) {
    const Offsets o = layout(spec);
    if (theta.size() != o.total || grad.size() != o.total)
        fail(Errc::dimension_mismatch, "parameter/gradient size mismatch");
    if (idx.empty()) fail(Errc::bad_range, "empty batch");

    std::fill(grad.begin(), grad.end(), 0.0);
    FwdCache fc;
    double loss = 0.0;
    const double inv_b = 1.0 / static_cast<double>(idx.size());
    for (const size_t i : idx) {
        const Sample& smp = data[i];
        const double p = forward_all(spec, o, theta.data(), smp, fc);
        (void)p;
        const double y = smp.label != 0 ? 1.0 : 0.0;
        loss += (softplus(fc.z) - y * fc.z) * inv_b;
        backward_all(spec, o, theta.data(), smp, fc, (fc.p - y) * inv_b, grad.data());
    }

    if (l2 > 0.0) {
        for_each_weight_segment(spec, o, [&](size_t off, size_t len, size_t) {
            loss += 0.5 * l2 * kernels::sumsq(theta.data() + off, len);
            kernels::axpy(l2, theta.data() + off, grad.data() + off, len);
        });
    }
    return loss;
}

TrainResult train(const ModelSpec& spec, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const TrainConfig& cfg) {
    if (train_set.empty() || val_set.empty()) fail(Errc::bad_range, "empty train or validation set");
    size_t pos = 0;
    for (const auto& s : train_set) pos += s.label != 0;
    if (pos == 0) fail(Errc::no_minority_in_training, "training set has no deceased stays");
    if (pos == train_set.size()) fail(Errc::no_minority_in_training, "training set has a single class");

    const Offsets o = layout(spec);
    TrainResult result;
    result.theta = init_params(spec, cfg.seed);
    std::vector<double> grad(o.total, 0.0);
    std::vector<double> best = result.theta;

    Rng shuffle_rng(derive_seed(cfg.seed, 0x5feed));
    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    auto val_auc = [&](const std::vector<double>& theta) {
        ScoredSet scored;
        FwdCache fc;
        for (const auto& s : val_set) {
            scored.scores.push_back(forward_all(spec, o, theta.data(), s, fc));
            scored.labels.push_back(s.label);
        }
        return auc_roc(scored);
    };

    double best_auc = -1.0;
    int bad_epochs = 0;
    const size_t bs = cfg.batch <= 0 ? train_set.size() : static_cast<size_t>(cfg.batch);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        size_t seen = 0;
        for (size_t start = 0; start < order.size(); start += bs) {
            const size_t len = std::min(bs, order.size() - start);
            const double loss =
                loss_grad_batch(spec, result.theta, train_set, {order.data() + start, len}, cfg.l2, grad);
            epoch_loss += loss * static_cast<double>(len);
            seen += len;
            const double norm = std::sqrt(kernels::sumsq(grad.data(), grad.size()));
            const double scale = (cfg.clip > 0.0 && norm > cfg.clip) ? cfg.clip / norm : 1.0;
            kernels::axpy(-cfg.lr * scale, grad.data(), result.theta.data(), grad.size());
        }
        EpochStats st;
        st.epoch = epoch;
        st.train_loss = epoch_loss / static_cast<double>(seen);
        st.val_auc = val_auc(result.theta);
        result.history.push_back(st);

        if (st.val_auc > best_auc) {
            best_auc = st.val_auc;
            best = result.theta;
            result.best_epoch = epoch;
            bad_epochs = 0;
        } else if (++bad_epochs > cfg.patience) {
            break;
        }
    }
    result.theta = std::move(best);
    result.best_val_auc = best_auc;
    return result;
}

double logreg_forward(std::span<const double> weights, double bias, std::span<const double> x) {
    if (weights.size() != x.size()) fail(Errc::dimension_mismatch, "weight/input width mismatch");
    const double z = std::clamp(bias + kernels::dot(weights.data(), x.data(), x.size()), -LOGIT_CLIP, LOGIT_CLIP);
    return sigmoid(z);
}

size_t LstmParams::size_for(size_t input_dim, size_t hidden) {
    return LstmLayout{0, input_dim, hidden}.size();
}

LstmParams make_lstm_params(size_t input_dim, size_t hidden) {
    LstmParams p;
    p.input_dim = input_dim;
    p.hidden = hidden;
    p.theta.assign(LstmParams::size_for(input_dim, hidden), 0.0);
    return p;
}

std::vector<double> lstm_forward(const LstmParams& p, std::span<const double> seq, size_t seq_len) {
    if (seq.size() != seq_len * p.input_dim) fail(Errc::dimension_mismatch, "sequence shape mismatch");
    if (p.theta.size() != LstmParams::size_for(p.input_dim, p.hidden))
        fail(Errc::dimension_mismatch, "parameter block size mismatch");
    LstmCache cc;
    lstm_fwd(p.theta.data(), LstmLayout{0, p.input_dim, p.hidden}, seq.data(), seq_len, cc);
    return cc.h;
}

ChannelwiseParams make_channelwise_params(size_t channels, size_t channel_hidden, size_t hidden) {
    ChannelwiseParams p;
    p.channels = channels;
    p.channel_hidden = channel_hidden;
    p.hidden = hidden;
    p.theta.assign(channels * LstmParams::size_for(1, channel_hidden) +
                       LstmParams::size_for(channels * channel_hidden, hidden),
                   0.0);
    return p;
}

std::vector<double> channelwise_forward(const ChannelwiseParams& p, std::span<const double> seq,
                                        size_t seq_len) {
    ModelSpec spec;
    spec.kind = ModelKind::channelwise;
    spec.fusion = FusionKind::none;
    spec.seq_len = seq_len;
    spec.channels = p.channels;
    spec.hidden = p.hidden;
    spec.channel_hidden = p.channel_hidden;
    const Offsets o = layout(spec);
    const size_t stack = o.head_Vh; // recurrent parameters precede the head
    if (p.theta.size() != stack) fail(Errc::dimension_mismatch, "parameter block size mismatch");

    Sample smp;
    smp.seq.assign(seq.begin(), seq.end());
    std::vector<double> full(o.total, 0.0);
    std::copy(p.theta.begin(), p.theta.end(), full.begin());
    FwdCache fc;
    (void)forward_all(spec, o, full.data(), smp, fc);
    return std::vector<double>(fc.top.final_hidden(), fc.top.final_hidden() + p.hidden);
}

} // namespace vf
