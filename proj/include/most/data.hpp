#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "most/rng.hpp"
#include "most/tensor.hpp"

namespace most {

/// One (d1, d2, w) sample of a tensor time series.
struct TtsWindow {
    Tensor values;  // shape (d1, d2, w)
    int label = -1;
    int64_t sample_id = 0;

    size_t d1() const { return values.dim(0); }
    size_t d2() const { return values.dim(1); }
    size_t w() const { return values.dim(2); }
};

/// Slice(X): mode-1 slices fix a mode-2 index j and span (d1, w);
/// mode-2 slices fix a mode-1 index i and span (d2, w).
struct SlicedTensor {
    std::vector<Tensor> mode1;  // d2 matrices, each (d1, w)
    std::vector<Tensor> mode2;  // d1 matrices, each (d2, w)
};

SlicedTensor slice(const TtsWindow& x);

/// Reassemble a window from one mode's slice set (inverse of slice()).
TtsWindow assemble_from_mode1(const std::vector<Tensor>& mode1);
TtsWindow assemble_from_mode2(const std::vector<Tensor>& mode2);

/// Two overlapping crops of a length-w window, half-open time ranges.
/// view1 covers [a1, b1), view2 covers [a2, b2), overlap is [a2, b1).
struct CropIndices {
    size_t a1 = 0, a2 = 0, b1 = 0, b2 = 0;
    size_t overlap() const { return b1 - a2; }
};

struct CropPair {
    CropIndices idx;
    TtsWindow view1;
    TtsWindow view2;
};

/// Draws (a1, a2, b1, b2) with 0 <= a1 <= a2 < b1 <= b2 <= w and
/// b1 - a2 >= min_overlap. The overlap length is uniform on
/// [min_overlap, w]; the free endpoints are then uniform over their
/// remaining ranges.
CropIndices sample_crop_pair(size_t w, Rng& rng, size_t min_overlap);

size_t default_min_overlap(size_t w);  // max(1, w/8)

CropPair make_crop_pair(const TtsWindow& x, const CropIndices& idx);
TtsWindow crop_window(const TtsWindow& x, size_t t0, size_t t1);

// ---- synthetic generator ----------------------------------------------------

/// Nine window families from the cross product of three per-mode
/// dependency types: mode-1 types are AR(2) driver dynamics, mode-2 types
/// are column transforms (identity, sign-flip+lag, seasonal modulation).
/// A window labeled (g, h) assigns driver type (i+g)%3 to row i and
/// transform type (j+h)%3 to column j.
struct SyntheticSpec {
    size_t w = 128;
    size_t windows_per_cell = 12;
    double noise_std = 0.1;
    uint64_t seed = 7;
    bool identity_transforms = false;  // degenerate B for tests
};

struct SyntheticData {
    std::vector<TtsWindow> windows;                // label = g*3 + h
    std::vector<std::array<int, 2>> mode_labels;   // (g, h) per window
    // side information for validation, aligned with windows:
    // drivers[k] is (3, margin + w); window time t maps to column margin + t.
    std::vector<Tensor> drivers;
    std::vector<Tensor> clean;  // pre-noise cell values, (3, 3, w)
    size_t margin = 0;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Recompute the pre-noise value of cell (i, j) at window time t from a
/// stored driver block. Used by tests to validate the group structure.
double synthetic_transform(const Tensor& drivers, size_t margin, size_t i, size_t j,
                           size_t t, int transform_type, bool identity_transforms);

// ---- ingestion ---------------------------------------------------------------

enum class Layout { BinaryTensor, CsvLong };

struct DatasetSpec {
    std::string path;
    Layout layout = Layout::BinaryTensor;
    size_t window = 128;
    size_t stride = 0;  // 0 -> window (non-overlapping)
    double train_frac = 0.6, valid_frac = 0.2, test_frac = 0.2;
    bool split_by_samples = false;  // default: contiguous split along time
    std::string labels_path;        // optional window-label CSV (sample splits)
    double std_floor = 1e-8;
};

struct NormStats {
    Tensor mean;   // (d1, d2)
    Tensor stdev;  // (d1, d2), floored
};

struct IngestResult {
    size_t d1 = 0, d2 = 0, total_time = 0;
    Tensor series;  // normalized full series (d1, d2, T)
    NormStats stats;
    std::vector<TtsWindow> train, valid, test;
};

IngestResult ingest(const DatasetSpec& spec);

// ---- binary tensor container --------------------------------------------------
// magic "MOST", u32 version, three u64 dims, then f64 payload in row-major
// (i, j, t) order, all little-endian.

void write_tensor_file(const std::string& path, const Tensor& t);
Tensor read_tensor_file(const std::string& path);

void write_labels_csv(const std::string& path, const std::vector<std::array<int, 2>>& labels);
std::vector<std::array<int, 2>> read_labels_csv(const std::string& path);

}  // namespace most
