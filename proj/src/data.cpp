#include "most/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "most/errors.hpp"

namespace most {

namespace {

constexpr char kMagic[4] = {'M', 'O', 'S', 'T'};
constexpr uint32_t kTensorFileVersion = 1;

constexpr double kPi = 3.14159265358979323846;
constexpr size_t kDriverMargin = 4;
constexpr size_t kDriverBurnIn = 128;
constexpr size_t kSyntheticLag = 2;
constexpr double kSeasonBeta = 0.4;
constexpr double kSeasonPeriod = 16.0;

// AR(2) coefficient sets: resonant oscillation, smooth drift, fast alternation.
constexpr double kArCoef[3][2] = {{1.5, -0.9}, {0.95, 0.0}, {-1.0, -0.5}};

void store_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void store_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

void store_f64(std::ostream& os, double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    store_u64(os, v);
}

uint32_t load_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError("tensor file: truncated while reading u32");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

uint64_t load_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw IoError("tensor file: truncated while reading u64");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

double load_f64(std::istream& is) {
    uint64_t v = load_u64(is);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

}  // namespace

SlicedTensor slice(const TtsWindow& x) {
    size_t d1 = x.d1(), d2 = x.d2(), w = x.w();
    SlicedTensor out;
    out.mode1.reserve(d2);
    out.mode2.reserve(d1);
    for (size_t j = 0; j < d2; ++j) {
        Tensor m({d1, w});
        for (size_t i = 0; i < d1; ++i)
            for (size_t t = 0; t < w; ++t) m(i, t) = x.values.at3(i, j, t);
        out.mode1.push_back(std::move(m));
    }
    for (size_t i = 0; i < d1; ++i) {
        Tensor m({d2, w});
        for (size_t j = 0; j < d2; ++j)
            for (size_t t = 0; t < w; ++t) m(j, t) = x.values.at3(i, j, t);
        out.mode2.push_back(std::move(m));
    }
    return out;
}

TtsWindow assemble_from_mode1(const std::vector<Tensor>& mode1) {
    if (mode1.empty()) throw std::invalid_argument("assemble_from_mode1: empty slice set");
    size_t d2 = mode1.size(), d1 = mode1[0].rows(), w = mode1[0].cols();
    TtsWindow x;
    x.values = Tensor({d1, d2, w});
    for (size_t j = 0; j < d2; ++j)
        for (size_t i = 0; i < d1; ++i)
            for (size_t t = 0; t < w; ++t) x.values.at3(i, j, t) = mode1[j](i, t);
    return x;
}

TtsWindow assemble_from_mode2(const std::vector<Tensor>& mode2) {
    if (mode2.empty()) throw std::invalid_argument("assemble_from_mode2: empty slice set");
    size_t d1 = mode2.size(), d2 = mode2[0].rows(), w = mode2[0].cols();
    TtsWindow x;
    x.values = Tensor({d1, d2, w});
    for (size_t i = 0; i < d1; ++i)
        for (size_t j = 0; j < d2; ++j)
            for (size_t t = 0; t < w; ++t) x.values.at3(i, j, t) = mode2[i](j, t);
    return x;
}

size_t default_min_overlap(size_t w) { return std::max<size_t>(1, w / 8); }

CropIndices sample_crop_pair(size_t w, Rng& rng, size_t min_overlap) {
    if (min_overlap < 1) throw std::invalid_argument("sample_crop_pair: min_overlap must be >= 1");
    if (w < min_overlap) {
        throw std::invalid_argument("sample_crop_pair: window length " + std::to_string(w) +
                                    " < min_overlap " + std::to_string(min_overlap));
    }
    CropIndices c;
    size_t overlap = static_cast<size_t>(rng.uniform(min_overlap, w));
    c.a2 = static_cast<size_t>(rng.uniform(0, w - overlap));
    c.b1 = c.a2 + overlap;
    c.a1 = static_cast<size_t>(rng.uniform(0, c.a2));
    c.b2 = static_cast<size_t>(rng.uniform(c.b1, w));
    return c;
}

TtsWindow crop_window(const TtsWindow& x, size_t t0, size_t t1) {
    if (t0 >= t1 || t1 > x.w()) {
        throw std::invalid_argument("crop_window: bad range [" + std::to_string(t0) + "," +
                                    std::to_string(t1) + ") for w=" + std::to_string(x.w()));
    }
    size_t d1 = x.d1(), d2 = x.d2(), w = t1 - t0;
    TtsWindow out;
    out.values = Tensor({d1, d2, w});
    out.label = x.label;
    out.sample_id = x.sample_id;
    for (size_t i = 0; i < d1; ++i)
        for (size_t j = 0; j < d2; ++j)
            for (size_t t = 0; t < w; ++t) out.values.at3(i, j, t) = x.values.at3(i, j, t0 + t);
    return out;
}

CropPair make_crop_pair(const TtsWindow& x, const CropIndices& idx) {
    CropPair p;
    p.idx = idx;
    p.view1 = crop_window(x, idx.a1, idx.b1);
    p.view2 = crop_window(x, idx.a2, idx.b2);
    return p;
}

// ---- synthetic generator ----------------------------------------------------

namespace {

// one standardized AR(2) segment of length margin + w
std::vector<double> ar2_segment(int type, size_t w, Rng& rng) {
    double p1 = kArCoef[type][0], p2 = kArCoef[type][1];
    size_t n = kDriverBurnIn + kDriverMargin + w;
    std::vector<double> u(n, 0.0);
    for (size_t t = 2; t < n; ++t) {
        u[t] = p1 * u[t - 1] + p2 * u[t - 2] + rng.normal();
    }
    std::vector<double> seg(u.begin() + kDriverBurnIn, u.end());
    double mean = 0.0;
    for (double v : seg) mean += v;
    mean /= static_cast<double>(seg.size());
    double var = 0.0;
    for (double v : seg) var += (v - mean) * (v - mean);
    var /= static_cast<double>(seg.size());
    double inv = 1.0 / std::sqrt(std::max(var, 1e-12));
    for (double& v : seg) v = (v - mean) * inv;
    return seg;
}

}  // namespace

double synthetic_transform(const Tensor& drivers, size_t margin, size_t i, size_t j, size_t t,
                           int transform_type, bool identity_transforms) {
    double u_t = drivers(i, margin + t);
    if (identity_transforms) return u_t;
    switch (transform_type) {
        case 0:
            return u_t;
        case 1:
            return -drivers(i, margin + t - kSyntheticLag);
        case 2:
            return u_t * (1.0 + kSeasonBeta *
                                    std::sin(2.0 * kPi * static_cast<double>(t) / kSeasonPeriod +
                                             2.0 * kPi * static_cast<double>(j) / 3.0));
        default:
            throw std::invalid_argument("synthetic_transform: unknown transform type");
    }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    if (spec.w < 64) {
        throw std::invalid_argument("generate_synthetic: window length must be >= 64, got " +
                                    std::to_string(spec.w));
    }
    Rng rng(spec.seed);
    SyntheticData out;
    out.margin = kDriverMargin;
    size_t id = 0;
    for (size_t k = 0; k < spec.windows_per_cell; ++k) {
        for (int g = 0; g < 3; ++g) {
            for (int h = 0; h < 3; ++h) {
                Tensor drv({3, kDriverMargin + spec.w});
                for (size_t i = 0; i < 3; ++i) {
                    int type = (static_cast<int>(i) + g) % 3;
                    std::vector<double> seg = ar2_segment(type, spec.w, rng);
                    for (size_t t = 0; t < kDriverMargin + spec.w; ++t) drv(i, t) = seg[t];
                }
                Tensor clean({3, 3, spec.w});
                TtsWindow win;
                win.values = Tensor({3, 3, spec.w});
                win.label = g * 3 + h;
                win.sample_id = static_cast<int64_t>(id++);
                for (size_t i = 0; i < 3; ++i) {
                    for (size_t j = 0; j < 3; ++j) {
                        int ttype = (static_cast<int>(j) + h) % 3;
                        for (size_t t = 0; t < spec.w; ++t) {
                            double v = synthetic_transform(drv, kDriverMargin, i, j, t, ttype,
                                                           spec.identity_transforms);
                            clean.at3(i, j, t) = v;
                            win.values.at3(i, j, t) = v + spec.noise_std * rng.normal();
                        }
                    }
                }
                out.windows.push_back(std::move(win));
                out.mode_labels.push_back({g, h});
                out.drivers.push_back(std::move(drv));
                out.clean.push_back(std::move(clean));
            }
        }
    }
    return out;
}

// ---- binary container ---------------------------------------------------------

void write_tensor_file(const std::string& path, const Tensor& t) {
    if (t.rank() != 3) {
        throw std::invalid_argument("write_tensor_file: expected rank-3 tensor, got " +
                                    shape_str(t.shape));
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("write_tensor_file: cannot open " + path);
    os.write(kMagic, 4);
    store_u32(os, kTensorFileVersion);
    store_u64(os, t.dim(0));
    store_u64(os, t.dim(1));
    store_u64(os, t.dim(2));
    for (double v : t.data) store_f64(os, v);
    if (!os) throw IoError("write_tensor_file: write failed for " + path);
}

Tensor read_tensor_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("read_tensor_file: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("read_tensor_file: bad magic in " + path);
    }
    uint32_t version = load_u32(is);
    if (version != kTensorFileVersion) {
        throw IoError("read_tensor_file: unsupported version " + std::to_string(version));
    }
    size_t a = load_u64(is), b = load_u64(is), c = load_u64(is);
    if (a == 0 || b == 0 || c == 0 || a > (1u << 24) || b > (1u << 24) || c > (1u << 30) ||
        a * b > (size_t{1} << 30) / std::max<size_t>(c, 1)) {
        throw IoError("read_tensor_file: implausible dimensions " + std::to_string(a) + "x" +
                      std::to_string(b) + "x" + std::to_string(c) + " in " + path);
    }
    Tensor t({a, b, c});
    for (size_t k = 0; k < t.data.size(); ++k) t.data[k] = load_f64(is);
    return t;
}

void write_labels_csv(const std::string& path, const std::vector<std::array<int, 2>>& labels) {
    std::ofstream os(path);
    if (!os) throw IoError("write_labels_csv: cannot open " + path);
    os << "window_index,label_mode1,label_mode2\n";
    for (size_t k = 0; k < labels.size(); ++k) {
        os << k << "," << labels[k][0] << "," << labels[k][1] << "\n";
    }
}

std::vector<std::array<int, 2>> read_labels_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("read_labels_csv: cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw DataError("labels csv: missing header in " + path);
    std::vector<std::array<int, 2>> out;
    size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string f0, f1, f2;
        if (!std::getline(ss, f0, ',') || !std::getline(ss, f1, ',') || !std::getline(ss, f2, ',')) {
            throw DataError("labels csv: malformed row at line " + std::to_string(line_no));
        }
        try {
            out.push_back({std::stoi(f1), std::stoi(f2)});
        } catch (const std::exception&) {
            throw DataError("labels csv: bad integer at line " + std::to_string(line_no));
        }
    }
    return out;
}

// ---- ingestion -----------------------------------------------------------------

namespace {

Tensor read_csv_long(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("ingest: cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw DataError("csv-long: missing header in " + path);
    // tolerate \r\n and whitespace in the header
    std::string hdr = line;
    hdr.erase(std::remove_if(hdr.begin(), hdr.end(),
                             [](char c) { return c == ' ' || c == '\r'; }),
              hdr.end());
    if (hdr != "mode1_id,mode2_id,time_index,value") {
        throw DataError("csv-long: unexpected header at line 1: '" + line + "'");
    }
    struct Entry {
        size_t i, j, t;
        double v;
    };
    std::vector<Entry> entries;
    size_t d1 = 0, d2 = 0, T = 0;
    size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string f[4];
        for (int k = 0; k < 4; ++k) {
            if (!std::getline(ss, f[k], ',')) {
                throw DataError("csv-long: malformed row at line " + std::to_string(line_no));
            }
        }
        Entry e{};
        try {
            long i = std::stol(f[0]), j = std::stol(f[1]), t = std::stol(f[2]);
            if (i < 0 || j < 0 || t < 0) throw std::out_of_range("negative index");
            e.i = static_cast<size_t>(i);
            e.j = static_cast<size_t>(j);
            e.t = static_cast<size_t>(t);
            e.v = std::stod(f[3]);
        } catch (const std::exception&) {
            throw DataError("csv-long: parse error at line " + std::to_string(line_no));
        }
        d1 = std::max(d1, e.i + 1);
        d2 = std::max(d2, e.j + 1);
        T = std::max(T, e.t + 1);
        entries.push_back(e);
    }
    if (entries.empty()) throw DataError("csv-long: no data rows in " + path);
    Tensor series({d1, d2, T});
    std::vector<char> seen(series.numel(), 0);
    for (const Entry& e : entries) {
        size_t flat = (e.i * d2 + e.j) * T + e.t;
        series.data[flat] = e.v;
        seen[flat] = 1;
    }
    for (size_t flat = 0; flat < seen.size(); ++flat) {
        if (!seen[flat]) {
            size_t i = flat / (d2 * T), j = (flat / T) % d2, t = flat % T;
            throw DataError("csv-long: missing entry for (" + std::to_string(i) + "," +
                            std::to_string(j) + "," + std::to_string(t) + ")");
        }
    }
    return series;
}

void check_finite(const Tensor& series) {
    size_t d2 = series.dim(1), T = series.dim(2);
    std::string bad;
    int count = 0;
    for (size_t flat = 0; flat < series.numel(); ++flat) {
        if (!std::isfinite(series.data[flat])) {
            size_t i = flat / (d2 * T), j = (flat / T) % d2, t = flat % T;
            if (count < 5) {
                bad += " (" + std::to_string(i) + "," + std::to_string(j) + "," +
                       std::to_string(t) + ")";
            }
            ++count;
        }
    }
    if (count > 0) {
        throw DataError("ingest: " + std::to_string(count) + " non-finite values at" + bad +
                        (count > 5 ? " ..." : ""));
    }
}

struct WindowRange {
    size_t t0;
};

}  // namespace

IngestResult ingest(const DatasetSpec& spec) {
    if (spec.window < 2) throw ConfigError("ingest: window length must be >= 2");
    double frac_sum = spec.train_frac + spec.valid_frac + spec.test_frac;
    if (spec.train_frac <= 0.0 || frac_sum > 1.0 + 1e-9) {
        throw ConfigError("ingest: split fractions must be positive and sum to <= 1");
    }
    IngestResult out;
    out.series = spec.layout == Layout::BinaryTensor ? read_tensor_file(spec.path)
                                                     : read_csv_long(spec.path);
    check_finite(out.series);
    out.d1 = out.series.dim(0);
    out.d2 = out.series.dim(1);
    out.total_time = out.series.dim(2);
    size_t T = out.total_time;
    size_t stride = spec.stride == 0 ? spec.window : spec.stride;
    if (T < spec.window) throw DataError("ingest: series shorter than one window");

    std::vector<size_t> starts;                    // window start offsets
    std::vector<int> assign;                       // 0 train, 1 valid, 2 test
    std::vector<std::array<int, 2>> window_labels;  // optional

    if (spec.split_by_samples) {
        for (size_t t0 = 0; t0 + spec.window <= T; t0 += stride) starts.push_back(t0);
        if (!spec.labels_path.empty()) {
            window_labels = read_labels_csv(spec.labels_path);
            if (window_labels.size() != starts.size()) {
                throw DataError("ingest: labels count " + std::to_string(window_labels.size()) +
                                " does not match window count " + std::to_string(starts.size()));
            }
        }
        // stratified contiguous assignment per label group (single group if unlabeled)
        std::map<int, std::vector<size_t>> groups;
        for (size_t k = 0; k < starts.size(); ++k) {
            int lab = window_labels.empty() ? 0 : window_labels[k][0] * 3 + window_labels[k][1];
            groups[lab].push_back(k);
        }
        assign.assign(starts.size(), 2);
        for (auto& [lab, idxs] : groups) {
            size_t n = idxs.size();
            size_t n_tr = static_cast<size_t>(std::llround(spec.train_frac * static_cast<double>(n)));
            size_t n_va = static_cast<size_t>(std::llround(spec.valid_frac * static_cast<double>(n)));
            n_tr = std::min(n_tr, n);
            n_va = std::min(n_va, n - n_tr);
            for (size_t k = 0; k < n; ++k) {
                assign[idxs[k]] = k < n_tr ? 0 : (k < n_tr + n_va ? 1 : 2);
            }
        }
    } else {
        size_t t_train = static_cast<size_t>(std::floor(spec.train_frac * static_cast<double>(T)));
        size_t t_valid = static_cast<size_t>(
            std::floor((spec.train_frac + spec.valid_frac) * static_cast<double>(T)));
        auto emit_region = [&](size_t lo, size_t hi, int tag) {
            for (size_t t0 = lo; t0 + spec.window <= hi; t0 += stride) {
                starts.push_back(t0);
                assign.push_back(tag);
            }
        };
        emit_region(0, t_train, 0);
        emit_region(t_train, t_valid, 1);
        emit_region(t_valid, T, 2);
        if (starts.empty() || assign[0] != 0) {
            throw DataError("ingest: train region shorter than one window");
        }
    }

    // normalization statistics from the train portion only
    out.stats.mean = Tensor({out.d1, out.d2});
    out.stats.stdev = Tensor({out.d1, out.d2});
    {
        Tensor sum({out.d1, out.d2}), sq({out.d1, out.d2});
        size_t count = 0;
        for (size_t k = 0; k < starts.size(); ++k) {
            if (assign[k] != 0) continue;
            for (size_t t = starts[k]; t < starts[k] + spec.window; ++t) {
                for (size_t i = 0; i < out.d1; ++i) {
                    for (size_t j = 0; j < out.d2; ++j) {
                        double v = out.series.at3(i, j, t);
                        sum(i, j) += v;
                        sq(i, j) += v * v;
                    }
                }
            }
            ++count;
        }
        if (count == 0) throw DataError("ingest: empty train split");
        double n = static_cast<double>(count * spec.window);
        for (size_t i = 0; i < out.d1; ++i) {
            for (size_t j = 0; j < out.d2; ++j) {
                double mean = sum(i, j) / n;
                double var = sq(i, j) / n - mean * mean;
                out.stats.mean(i, j) = mean;
                out.stats.stdev(i, j) = std::max(std::sqrt(std::max(var, 0.0)), spec.std_floor);
            }
        }
    }
    for (size_t i = 0; i < out.d1; ++i) {
        for (size_t j = 0; j < out.d2; ++j) {
            double mean = out.stats.mean(i, j), inv = 1.0 / out.stats.stdev(i, j);
            for (size_t t = 0; t < T; ++t) {
                out.series.at3(i, j, t) = (out.series.at3(i, j, t) - mean) * inv;
            }
        }
    }

    for (size_t k = 0; k < starts.size(); ++k) {
        TtsWindow win;
        win.values = Tensor({out.d1, out.d2, spec.window});
        win.sample_id = static_cast<int64_t>(k);
        if (!window_labels.empty()) win.label = window_labels[k][0] * 3 + window_labels[k][1];
        for (size_t i = 0; i < out.d1; ++i)
            for (size_t j = 0; j < out.d2; ++j)
                for (size_t t = 0; t < spec.window; ++t)
                    win.values.at3(i, j, t) = out.series.at3(i, j, starts[k] + t);
        (assign[k] == 0 ? out.train : assign[k] == 1 ? out.valid : out.test)
            .push_back(std::move(win));
    }
    return out;
}

}  // namespace most
