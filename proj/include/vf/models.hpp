#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vf {

enum class ModelKind { logreg, lstm, channelwise };
enum class FusionKind { none, waveform };

const char* model_kind_name(ModelKind k);
const char* fusion_kind_name(FusionKind f);
ModelKind parse_model_kind(const std::string& s);
FusionKind parse_fusion_kind(const std::string& s);

// Shapes of one configured network. seq inputs are T x K row-major; the
// waveform branch input is the 12 standardized features plus a presence flag.
struct ModelSpec {
    ModelKind kind = ModelKind::lstm;
    FusionKind fusion = FusionKind::none;
    size_t seq_len = 48;        // T
    size_t channels = 5;        // K
    size_t hidden = 16;         // H: lstm hidden / channelwise top hidden
    size_t channel_hidden = 4;  // h: per-channel hidden (channelwise)
    size_t wf_dim = 13;         // waveform branch input size
    size_t wf_dense = 8;        // F: waveform dense width

    size_t param_count() const;
};

struct Sample {
    std::vector<double> seq; // T*K
    std::vector<double> wf;  // wf_dim entries when the model fuses, else unused
    int label = 0;
};

struct TrainConfig {
    double lr = 0.01;
    int epochs = 60;
    int batch = 32;
    uint64_t seed = 1;
    double l2 = 1e-4;
    int patience = 5;
    double clip = 5.0;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_auc = 0.0;
};

struct TrainResult {
    std::vector<double> theta;
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double best_val_auc = 0.0;
};

// Weights drawn uniform in +-1/sqrt(fan_in), biases zero except the LSTM
// forget gates (1.0). Logistic regression starts at zero.
std::vector<double> init_params(const ModelSpec& spec, uint64_t seed);

double forward_prob(const ModelSpec& spec, std::span<const double> theta, const Sample& s);

// Mean binary cross-entropy over the index set plus (l2/2)*||weights||^2
// (biases unpenalized); writes the full analytic gradient.
double loss_grad_batch(const ModelSpec& spec, std::span<const double> theta,
                       const std::vector<Sample>& data, std::span<const size_t> idx, double l2,
                       std::span<double> grad);

// Mini-batch gradient descent with global-norm clipping and early stopping on
// validation AUC-ROC. Deterministic for a fixed seed.
TrainResult train(const ModelSpec& spec, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const TrainConfig& cfg);

// ---- standalone building blocks ----

double logreg_forward(std::span<const double> weights, double bias, std::span<const double> x);

// Gate-major parameter block [Wi Ui bi | Wf Uf bf | Wg Ug bg | Wo Uo bo],
// W row-major H x D, U row-major H x H.
struct LstmParams {
    size_t input_dim = 0;
    size_t hidden = 0;
    std::vector<double> theta;

    static size_t size_for(size_t input_dim, size_t hidden);
};

LstmParams make_lstm_params(size_t input_dim, size_t hidden); // zeroed

// Full hidden sequence (T x H) from zero initial state.
std::vector<double> lstm_forward(const LstmParams& p, std::span<const double> seq, size_t seq_len);

struct ChannelwiseParams {
    size_t channels = 0;
    size_t channel_hidden = 0;
    size_t hidden = 0;
    std::vector<double> theta; // [K x lstm(1,h)][lstm(K*h,H)]
};

ChannelwiseParams make_channelwise_params(size_t channels, size_t channel_hidden, size_t hidden);

// Final top-level hidden state (H).
std::vector<double> channelwise_forward(const ChannelwiseParams& p, std::span<const double> seq,
                                        size_t seq_len);

} // namespace vf
