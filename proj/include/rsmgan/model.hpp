#ifndef RSMGAN_MODEL_HPP
#define RSMGAN_MODEL_HPP

#include "rsmgan/layers.hpp"
#include "rsmgan/mcm.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rsmgan {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.9;
    double eps = 1e-8;
};

struct NetworkConfig {
    std::vector<long> conv_channels{32, 64, 128, 256};
    std::vector<long> conv_strides{1, 2, 2, 2};
    long kernel = 3;
    std::vector<long> disc_channels{32, 64, 128};
    double w_contextual = 50.0;
    double w_latent = 1.0;
    double w_adversarial = 1.0;
    double gp_coefficient = 10.0;
    double attention_rescale = 5.0;
    AdamConfig adam;
    long epochs = 300;
    long batch_size = 32;
    long critic_updates_per_gen = 1;
    bool holiday_masking = true;

    void validate() const;
};

struct EpochStats {
    long epoch = 0;
    double contextual = 0.0;
    double latent = 0.0;
    double adversarial = 0.0;
    double loss_g = 0.0;
    double loss_d = 0.0; // critic objective, penalty already subtracted
    double grad_penalty = 0.0;
};

struct LossBreakdown {
    double contextual = 0.0;
    double latent = 0.0;
    double adversarial = 0.0;
    double loss_g = 0.0;
    double loss_d = 0.0;       // mean f(x) - mean f(x') - lambda * penalty
    double grad_penalty = 0.0; // E[(||grad f|| - 1)^2]
};

/// Plain-value loss assembly per the objective definitions; the training
/// loop mirrors these formulas in graph form.
LossBreakdown compute_losses(const std::vector<Tensor>& x, const std::vector<Tensor>& x_rec,
                             const std::vector<Tensor>& z, const std::vector<Tensor>& z_rec,
                             const std::vector<double>& critic_real,
                             const std::vector<double>& critic_fake, double grad_penalty,
                             const NetworkConfig& cfg);

class TrainingDivergence : public std::runtime_error {
public:
    TrainingDivergence(long epoch, const std::string& what)
        : std::runtime_error(what), epoch(epoch) {}
    long epoch;
};

struct ForwardResult {
    Tensor reconstruction;            // (C, n, n)
    Tensor latent;                    // flattened final recurrent state
    std::vector<Tensor> attention;    // per conv-LSTM layer: (N) weights
};

struct ReconstructionResult {
    std::vector<long> target_steps;
    std::vector<Tensor> reconstructions; // (C, n, n)
    std::vector<Tensor> residuals;       // channel-0 (n, n)
};

/// The adversarial reconstruction model: generator (encoder G_E + decoder
/// G_D), joint encoder E, and critic D, trained with the weighted
/// contextual/latent/adversarial objective and gradient-penalty critic.
class ReconstructionModel {
public:
    ReconstructionModel(NetworkConfig cfg, long n, long channels, long slots, std::uint64_t seed);

    static ReconstructionModel train(const std::vector<ModelInput>& inputs,
                                     const NetworkConfig& cfg, std::uint64_t seed,
                                     const std::function<void(const EpochStats&)>& on_epoch = {});

    ForwardResult forward_single(const ModelInput& input) const;
    ReconstructionResult reconstruct(const std::vector<ModelInput>& inputs) const;

    const NetworkConfig& config() const { return cfg_; }
    const std::vector<EpochStats>& history() const { return history_; }
    long input_size() const { return n_; }
    long input_channels() const { return channels_; }
    long slot_count() const { return slots_; }

    void save(const std::string& dir) const;
    static ReconstructionModel load(const std::string& dir);

    // Exposed for tests and the training loop.
    struct Impl;
    Impl& impl() { return *impl_; }
    const Impl& impl() const { return *impl_; }

private:
    NetworkConfig cfg_;
    long n_ = 0, channels_ = 0, slots_ = 0;
    std::vector<EpochStats> history_;
    std::shared_ptr<Impl> impl_;
};

/// WGAN-GP penalty on random interpolates between real and reconstructed
/// batches: E[(||grad_xhat f(xhat)||_2 - 1)^2]. The returned Var stays
/// connected to whatever parameters the critic closure uses, so it can be
/// differentiated again for the critic update.
Var gradient_penalty(const std::function<Var(const Var&)>& critic, const Tensor& real_batch,
                     const Tensor& fake_batch, Rng& rng);

} // namespace rsmgan

#endif
