#pragma once

// Dataset ingestion and non-i.i.d. partitioning: IDX (MNIST) reader, the
// synthetic Gaussian-blob task, and the label-skew splitter.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fedwba/numerics.hpp"

namespace fedwba {

struct Dataset {
    Matrix features;          // S x input_dim, values in [0, 1]
    std::vector<int> labels;  // S entries in [0, classes)
    int classes = 0;

    std::size_t size() const { return labels.size(); }

    void validate() const {
        require(features.rows == labels.size(), "Dataset: feature/label count mismatch");
        for (int l : labels)
            require(l >= 0 && l < classes, "Dataset: label out of range");
    }
};

struct ClientShard {
    int client_id = 0;
    Dataset train;
    Dataset test;
    std::vector<int> label_set;  // sorted
};

// --- IDX ---------------------------------------------------------------

namespace detail {

inline std::uint32_t read_u32_be(std::ifstream& f, const std::string& path,
                                 std::size_t offset) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("load_idx: " + path + " truncated at offset " +
                                 std::to_string(offset));
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace detail

// Parses an IDX image/label pair: big-endian magic 0x00000803 (images: count,
// rows, cols, u8 pixels) and 0x00000801 (labels: count, u8 labels). Pixels
// are scaled to [0, 1]; image and label counts must agree.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("load_idx: cannot open " + images_path);
    const std::uint32_t img_magic = detail::read_u32_be(img, images_path, 0);
    if (img_magic != 0x00000803u)
        throw std::runtime_error("load_idx: bad magic 0x" + std::to_string(img_magic) +
                                 " at offset 0 in " + images_path +
                                 " (expected 0x00000803)");
    const std::uint32_t count = detail::read_u32_be(img, images_path, 4);
    const std::uint32_t rows = detail::read_u32_be(img, images_path, 8);
    const std::uint32_t cols = detail::read_u32_be(img, images_path, 12);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("load_idx: cannot open " + labels_path);
    const std::uint32_t lab_magic = detail::read_u32_be(lab, labels_path, 0);
    if (lab_magic != 0x00000801u)
        throw std::runtime_error("load_idx: bad magic 0x" + std::to_string(lab_magic) +
                                 " at offset 0 in " + labels_path +
                                 " (expected 0x00000801)");
    const std::uint32_t lab_count = detail::read_u32_be(lab, labels_path, 4);
    if (count != lab_count)
        throw std::runtime_error("load_idx: image count " + std::to_string(count) +
                                 " != label count " + std::to_string(lab_count));

    const std::size_t dim = std::size_t(rows) * cols;
    Dataset out;
    out.features = Matrix(count, dim);
    out.labels.resize(count);

    std::vector<unsigned char> pix(dim);
    for (std::uint32_t i = 0; i < count; ++i) {
        if (!img.read(reinterpret_cast<char*>(pix.data()),
                      static_cast<std::streamsize>(dim)))
            throw std::runtime_error("load_idx: " + images_path + " truncated at offset " +
                                     std::to_string(16 + std::size_t(i) * dim));
        double* row = out.features.row(i);
        for (std::size_t d = 0; d < dim; ++d) row[d] = pix[d] / 255.0;
    }
    std::vector<unsigned char> raw(count);
    if (!lab.read(reinterpret_cast<char*>(raw.data()),
                  static_cast<std::streamsize>(count)))
        throw std::runtime_error("load_idx: " + labels_path + " truncated at offset 8");
    int max_label = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        out.labels[i] = raw[i];
        max_label = std::max(max_label, out.labels[i]);
    }
    out.classes = max_label + 1;
    return out;
}

// First n samples (MNIST files are shuffled upstream, so a prefix stays
// roughly class-balanced).
inline Dataset head(const Dataset& d, std::size_t n) {
    if (n == 0 || n >= d.size()) return d;
    Dataset out;
    out.classes = d.classes;
    out.features = Matrix(n, d.features.cols);
    out.labels.assign(d.labels.begin(), d.labels.begin() + static_cast<std::ptrdiff_t>(n));
    std::copy(d.features.data.begin(),
              d.features.data.begin() + static_cast<std::ptrdiff_t>(n * d.features.cols),
              out.features.data.begin());
    return out;
}

inline Dataset concat(const Dataset& a, const Dataset& b) {
    require(a.features.cols == b.features.cols, "concat: feature dims differ");
    Dataset out;
    out.classes = std::max(a.classes, b.classes);
    out.features = Matrix(a.size() + b.size(), a.features.cols);
    std::copy(a.features.data.begin(), a.features.data.end(), out.features.data.begin());
    std::copy(b.features.data.begin(), b.features.data.end(),
              out.features.data.begin() + static_cast<std::ptrdiff_t>(a.features.data.size()));
    out.labels = a.labels;
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    return out;
}

// --- synthetic blobs ----------------------------------------------------

// Deterministic center layout inside [0, 1]: baseline 0.5 everywhere, with
// the (c mod dim)-th coordinate pushed to 0.95 (first lap over the axes) or
// 0.05 (second lap).
inline std::vector<double> blob_center(int cls, std::size_t dim) {
    std::vector<double> mu(dim, 0.5);
    const std::size_t axis = static_cast<std::size_t>(cls) % dim;
    const int lap = cls / static_cast<int>(dim);
    mu[axis] = (lap % 2 == 0) ? 0.95 : 0.05;
    return mu;
}

// Class c drawn from N(mu_c, spread^2 I), clamped to [0, 1].
inline Dataset synth_blobs(int classes, std::size_t per_class, std::size_t dim,
                           double spread, Rng& rng) {
    require(classes >= 1 && per_class >= 1 && dim >= 1, "synth_blobs: counts must be >= 1");
    Dataset out;
    out.classes = classes;
    out.features = Matrix(static_cast<std::size_t>(classes) * per_class, dim);
    out.labels.resize(out.features.rows);
    std::size_t row = 0;
    for (int c = 0; c < classes; ++c) {
        const auto mu = blob_center(c, dim);
        for (std::size_t s = 0; s < per_class; ++s, ++row) {
            double* x = out.features.row(row);
            for (std::size_t d = 0; d < dim; ++d)
                x[d] = std::clamp(mu[d] + spread * rng.normal(), 0.0, 1.0);
            out.labels[row] = c;
        }
    }
    return out;
}

// --- label-skew partition -------------------------------------------------

// Assigns each client `labels_per_client` distinct labels (round-robin over
// labels first so global coverage is balanced, random fill for the
// remainder), splits each label's samples evenly among the clients holding
// it, and holds out a stratified test fraction inside every client.
inline std::vector<ClientShard> partition_label_skew(const Dataset& data,
                                                     std::size_t num_clients,
                                                     std::size_t labels_per_client,
                                                     double test_fraction, Rng& rng) {
    data.validate();
    const std::size_t classes = static_cast<std::size_t>(data.classes);
    require(num_clients >= 1, "partition_label_skew: need at least one client");
    require(labels_per_client >= 1 && labels_per_client <= classes,
            "partition_label_skew: labels_per_client must be in [1, classes]");
    require(test_fraction >= 0.0 && test_fraction < 1.0,
            "partition_label_skew: test_fraction must be in [0, 1)");

    // deck of label slots: each label appears floor(K*L/classes) times, the
    // remainder goes to randomly chosen labels
    const std::size_t slots = num_clients * labels_per_client;
    require(slots >= classes,
            "partition_label_skew: clients*labels_per_client must cover every label");
    std::vector<std::size_t> copies(classes, slots / classes);
    const std::size_t rem = slots % classes;
    if (rem > 0) {
        auto extra = rng.sample_without_replacement(classes, rem);
        for (std::size_t e : extra) ++copies[e];
    }

    // deal L distinct labels to each client; retry with a fresh shuffle when
    // a dealing round gets stuck on duplicates
    std::vector<std::vector<int>> label_sets;
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::vector<int> deck;
        for (std::size_t c = 0; c < classes; ++c)
            deck.insert(deck.end(), copies[c], static_cast<int>(c));
        for (std::size_t i = deck.size(); i > 1; --i)
            std::swap(deck[i - 1], deck[rng.uniform_index(i)]);

        label_sets.assign(num_clients, {});
        bool ok = true;
        std::vector<char> taken(deck.size(), 0);
        for (std::size_t k = 0; k < num_clients && ok; ++k) {
            std::set<int> held;
            for (std::size_t l = 0; l < labels_per_client; ++l) {
                bool found = false;
                for (std::size_t t = 0; t < deck.size(); ++t) {
                    if (taken[t] || held.count(deck[t])) continue;
                    taken[t] = 1;
                    held.insert(deck[t]);
                    found = true;
                    break;
                }
                if (!found) { ok = false; break; }
            }
            label_sets[k].assign(held.begin(), held.end());
        }
        if (ok) break;
        label_sets.clear();
    }
    require(!label_sets.empty(), "partition_label_skew: could not deal distinct label sets");

    // indices per label, shuffled, dealt round-robin to the holders
    std::vector<std::vector<std::size_t>> by_label(classes);
    for (std::size_t i = 0; i < data.size(); ++i)
        by_label[static_cast<std::size_t>(data.labels[i])].push_back(i);

    std::vector<std::vector<std::size_t>> client_rows(num_clients);
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<std::size_t> holders;
        for (std::size_t k = 0; k < num_clients; ++k)
            if (std::find(label_sets[k].begin(), label_sets[k].end(),
                          static_cast<int>(c)) != label_sets[k].end())
                holders.push_back(k);
        if (holders.empty()) continue;
        require(by_label[c].size() >= holders.size(),
                "partition_label_skew: not enough samples of label " + std::to_string(c));
        auto& idx = by_label[c];
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
        for (std::size_t t = 0; t < idx.size(); ++t)
            client_rows[holders[t % holders.size()]].push_back(idx[t]);
    }

    auto build = [&](const std::vector<std::size_t>& rows) {
        Dataset d;
        d.classes = data.classes;
        d.features = Matrix(rows.size(), data.features.cols);
        d.labels.resize(rows.size());
        for (std::size_t t = 0; t < rows.size(); ++t) {
            std::copy(data.features.row(rows[t]), data.features.row(rows[t]) + data.features.cols,
                      d.features.row(t));
            d.labels[t] = data.labels[rows[t]];
        }
        return d;
    };

    std::vector<ClientShard> shards(num_clients);
    for (std::size_t k = 0; k < num_clients; ++k) {
        // stratified held-out split, at least one test sample per label when
        // possible
        std::map<int, std::vector<std::size_t>> rows_by_label;
        for (std::size_t r : client_rows[k]) rows_by_label[data.labels[r]].push_back(r);
        std::vector<std::size_t> train_rows, test_rows;
        for (auto& [label, rows] : rows_by_label) {
            for (std::size_t i = rows.size(); i > 1; --i)
                std::swap(rows[i - 1], rows[rng.uniform_index(i)]);
            std::size_t n_test = static_cast<std::size_t>(
                std::floor(test_fraction * static_cast<double>(rows.size()) + 0.5));
            if (test_fraction > 0.0 && rows.size() >= 2) n_test = std::max<std::size_t>(n_test, 1);
            n_test = std::min(n_test, rows.size() - 1);
            test_rows.insert(test_rows.end(), rows.begin(),
                             rows.begin() + static_cast<std::ptrdiff_t>(n_test));
            train_rows.insert(train_rows.end(),
                              rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
        }
        std::sort(train_rows.begin(), train_rows.end());
        std::sort(test_rows.begin(), test_rows.end());
        shards[k].client_id = static_cast<int>(k);
        shards[k].train = build(train_rows);
        shards[k].test = build(test_rows);
        shards[k].label_set = label_sets[k];
    }
    return shards;
}

}  // namespace fedwba
