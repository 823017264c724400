#ifndef RSMGAN_MODEL_IMPL_HPP
#define RSMGAN_MODEL_IMPL_HPP

#include "rsmgan/model.hpp"
#include "rsmgan/nets.hpp"

namespace rsmgan {

/// Concrete network stack behind ReconstructionModel; exposed so tests can
/// reach individual components.
struct ReconstructionModel::Impl {
    Encoder g_enc;
    Decoder decoder;
    Encoder e_enc;
    Discriminator disc;

    Impl(const NetworkConfig& cfg, long n, long channels, std::uint64_t seed)
        : g_enc("g_enc", cfg, n, channels, Rng(seed).derive(1)),
          decoder("g_dec", cfg, n, channels, Rng(seed).derive(2)),
          e_enc("e_enc", cfg, n, channels, Rng(seed).derive(3)),
          disc("disc", cfg, n, channels, Rng(seed).derive(4)) {}

    std::vector<std::pair<std::string, Var>> named_params() const {
        std::vector<std::pair<std::string, Var>> all;
        for (const auto* reg : {&g_enc.params, &decoder.params, &e_enc.params, &disc.params})
            for (const auto& e : reg->entries) all.push_back(e);
        return all;
    }

    std::vector<Var> generator_params() const {
        std::vector<Var> v;
        for (const auto* reg : {&g_enc.params, &decoder.params, &e_enc.params})
            for (const auto& e : reg->entries) v.push_back(e.second);
        return v;
    }
};

} // namespace rsmgan

#endif
