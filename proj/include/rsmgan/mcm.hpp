#ifndef RSMGAN_MCM_HPP
#define RSMGAN_MCM_HPP

#include "rsmgan/series.hpp"
#include "rsmgan/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rsmgan {

struct SeasonalSlotSpec {
    long period_points = 0; // raw time points per period; must divide by step p
    long count = 0;         // m_i: how many past periods to stack
};

struct McmConfig {
    std::vector<long> windows{5, 10, 30}; // strictly increasing
    long step = 5;                        // p
    long history = 4;                     // h
    std::vector<SeasonalSlotSpec> seasonal;
    long smoothing_width = 6;

    void validate() const;
    long channels() const { return static_cast<long>(windows.size()); }
    long max_window() const { return windows.empty() ? 0 : windows.back(); }
    long slot_count() const;
};

/// Sequence of multi-channel correlation matrices. Matrices are stored
/// per step as (C, n, n) tensors; step k summarizes trailing windows
/// ending at raw point (k+1)*p - 1.
struct McmSequence {
    std::vector<Tensor> matrices; // M tensors of shape (C, n, n)
    std::vector<std::int64_t> step_epochs;
    std::vector<char> holiday_bits; // 1 when the step's receptive field touches a holiday
    long n = 0;
    long C = 0;
    long p = 0;
    long M = 0;
    long raw_T = 0;           // length of the source series
    long first_full_step = 0; // earliest step with every channel window inside the series

    long raw_begin(long step) const { return step * p; }
    long raw_end(long step) const { return (step + 1) * p; } // exclusive
};

/// Eq-1 featurization: channel c of step k holds the pairwise windowed
/// inner-product means over the trailing w_c points. Channels whose window
/// does not fit yet are left zero; first_full_step marks where all fit.
McmSequence build_mcm(const SeriesFrame& frame, const McmConfig& config);

/// One training/inference example: slot tensors in chronological order
/// (seasonal slots first, then the h immediate steps, then the current
/// step), the slot mask, and the reconstruction target.
struct ModelInput {
    long target_step = 0;
    std::vector<Tensor> slots; // slot_count tensors of shape (C, n, n)
    std::vector<char> mask;    // b_i per slot; current slot is always 1
    Tensor target;             // (C, n, n)
};

std::vector<ModelInput> assemble_inputs(const McmSequence& seq, const McmConfig& config);

/// Channel-0 residual matrix of a reconstruction against its target.
Tensor residual_first_channel(const Tensor& target, const Tensor& reconstruction);

void write_mcm_binary(const McmSequence& seq, const std::string& data_path,
                      const std::string& sidecar_path);
McmSequence read_mcm_binary(const std::string& data_path, const std::string& sidecar_path);

} // namespace rsmgan

#endif
