#include "btda/harness/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "btda/errors.hpp"
#include "btda/rng.hpp"

namespace btda::harness {

namespace {

std::vector<Index> expand_per_class(const std::vector<Index>& counts, Index classes,
                                    const char* what) {
    if (counts.size() == 1) return std::vector<Index>(static_cast<std::size_t>(classes), counts[0]);
    if (static_cast<Index>(counts.size()) != classes) {
        throw ConfigError(std::string(what) + ": need 1 or `classes` per-class counts");
    }
    return counts;
}

std::vector<Vector> place_centers(Index classes, Index dim, double separation,
                                  RngStream rng) {
    // Deterministic rejection: grow the candidate box until all pairwise
    // distances clear the separation.
    for (int attempt = 0;; ++attempt) {
        const double half =
            0.5 * separation * static_cast<double>(classes) * (1.0 + 0.5 * attempt);
        std::vector<Vector> centers;
        centers.reserve(static_cast<std::size_t>(classes));
        for (Index c = 0; c < classes; ++c) {
            Vector center(dim);
            for (Index k = 0; k < dim; ++k) center(k) = rng.uniform(-half, half);
            centers.push_back(std::move(center));
        }
        bool ok = true;
        for (Index a = 0; a < classes && ok; ++a) {
            for (Index b = a + 1; b < classes && ok; ++b) {
                ok = (centers[static_cast<std::size_t>(a)] -
                      centers[static_cast<std::size_t>(b)]).norm() >= separation;
            }
        }
        if (ok) return centers;
    }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MalformedIdx("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::uint32_t read_u32_be(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
    return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
           (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
           static_cast<std::uint32_t>(bytes[offset + 3]);
}

}  // namespace

DatasetPair generate_blobs(const BlobsConfig& config) {
    if (config.classes < 2) throw ConfigError("blobs: classes must be >= 2");
    if (config.dim < 2) throw ConfigError("blobs: dim must be >= 2");
    if (config.separation <= 0.0 || config.sigma <= 0.0) {
        throw ConfigError("blobs: separation and sigma must be > 0");
    }

    const auto train_counts =
        expand_per_class(config.train_per_class, config.classes, "blobs.train_per_class");
    const auto test_counts =
        expand_per_class(config.test_per_class, config.classes, "blobs.test_per_class");

    const RngStream base(config.data_seed, 0);
    const auto centers =
        place_centers(config.classes, config.dim, config.separation, base.substream(0));

    const auto draw = [&](RngStream rng, const std::vector<Index>& counts,
                          auto&& emit) {
        for (Index c = 0; c < config.classes; ++c) {
            for (Index i = 0; i < counts[static_cast<std::size_t>(c)]; ++i) {
                Vector x = centers[static_cast<std::size_t>(c)];
                for (Index k = 0; k < config.dim; ++k) {
                    x(k) += config.sigma * rng.gaussian();
                }
                emit(std::move(x), static_cast<int>(c));
            }
        }
    };

    const Index n_train = std::accumulate(train_counts.begin(), train_counts.end(), Index{0});
    DatasetPair out;
    out.input_dim = config.dim;
    out.num_classes = config.classes;
    out.train.features.resize(n_train, config.dim);
    out.train.labels.reserve(static_cast<std::size_t>(n_train));
    out.train.loss_weights = Vector::Ones(n_train);

    Index row = 0;
    draw(base.substream(1), train_counts, [&](Vector x, int label) {
        out.train.features.row(row++) = x.transpose();
        out.train.labels.push_back(label);
    });
    draw(base.substream(2), test_counts, [&](Vector x, int label) {
        out.test.push_back({std::move(x), label});
    });
    return out;
}

IdxImages read_idx_images(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 16) throw MalformedIdx("image file too short: " + path.string());
    if (read_u32_be(bytes, 0) != 0x00000803u) {
        throw MalformedIdx("bad image magic in " + path.string());
    }
    IdxImages images;
    images.count = static_cast<Index>(read_u32_be(bytes, 4));
    images.rows = static_cast<Index>(read_u32_be(bytes, 8));
    images.cols = static_cast<Index>(read_u32_be(bytes, 12));
    const std::size_t expected =
        16 + static_cast<std::size_t>(images.count) * static_cast<std::size_t>(images.rows) *
                 static_cast<std::size_t>(images.cols);
    if (bytes.size() != expected) {
        throw MalformedIdx("image payload size mismatch in " + path.string());
    }
    images.pixels.assign(bytes.begin() + 16, bytes.end());
    return images;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 8) throw MalformedIdx("label file too short: " + path.string());
    if (read_u32_be(bytes, 0) != 0x00000801u) {
        throw MalformedIdx("bad label magic in " + path.string());
    }
    const auto count = static_cast<std::size_t>(read_u32_be(bytes, 4));
    if (bytes.size() != 8 + count) {
        throw MalformedIdx("label payload size mismatch in " + path.string());
    }
    return {bytes.begin() + 8, bytes.end()};
}

DatasetPair load_idx(const IdxConfig& config) {
    if (config.downscale < 1) throw ConfigError("idx: downscale must be >= 1");

    const IdxImages images = read_idx_images(config.image_path);
    const auto labels = read_idx_labels(config.label_path);
    if (static_cast<Index>(labels.size()) != images.count) {
        throw MalformedIdx("image/label count mismatch");
    }
    for (std::uint8_t label : labels) {
        if (static_cast<int>(label) > config.max_label) {
            throw MalformedIdx("label out of range: " + std::to_string(int(label)));
        }
    }
    if (images.rows % config.downscale != 0 || images.cols % config.downscale != 0) {
        throw ConfigError("idx: downscale must divide image dimensions");
    }

    // Class set: explicit filter or every label present, relabeled 0..K-1.
    std::set<int> class_set;
    if (config.keep_classes.empty()) {
        for (std::uint8_t label : labels) class_set.insert(static_cast<int>(label));
    } else {
        class_set.insert(config.keep_classes.begin(), config.keep_classes.end());
    }
    std::map<int, int> relabel;
    for (int c : class_set) relabel[c] = static_cast<int>(relabel.size());

    std::map<int, std::vector<Index>> by_class;
    for (Index i = 0; i < images.count; ++i) {
        const int label = static_cast<int>(labels[static_cast<std::size_t>(i)]);
        if (relabel.count(label)) by_class[label].push_back(i);
    }

    const Index out_rows = images.rows / config.downscale;
    const Index out_cols = images.cols / config.downscale;
    const Index dim = out_rows * out_cols;
    const double block = static_cast<double>(config.downscale * config.downscale);

    const auto pooled_features = [&](Index image) {
        Vector x(dim);
        const std::size_t base = static_cast<std::size_t>(image) *
                                 static_cast<std::size_t>(images.rows * images.cols);
        for (Index r = 0; r < out_rows; ++r) {
            for (Index c = 0; c < out_cols; ++c) {
                double acc = 0.0;
                for (Index dr = 0; dr < config.downscale; ++dr) {
                    for (Index dc = 0; dc < config.downscale; ++dc) {
                        const Index rr = r * config.downscale + dr;
                        const Index cc = c * config.downscale + dc;
                        acc += images.pixels[base + static_cast<std::size_t>(rr * images.cols + cc)];
                    }
                }
                x(r * out_cols + c) = acc / (255.0 * block);
            }
        }
        return x;
    };

    const Index n_classes = static_cast<Index>(class_set.size());
    const Index n_train = config.per_class_train * n_classes;
    DatasetPair out;
    out.input_dim = dim;
    out.num_classes = n_classes;
    out.train.features.resize(n_train, dim);
    out.train.labels.reserve(static_cast<std::size_t>(n_train));
    out.train.loss_weights = Vector::Ones(n_train);

    const RngStream base(config.data_seed, 0);
    Index row = 0;
    for (const auto& [label, indices] : by_class) {
        const Index needed = config.per_class_train + config.per_class_test;
        if (static_cast<Index>(indices.size()) < needed) {
            throw ConfigError("idx: class " + std::to_string(label) +
                              " has too few samples (" + std::to_string(indices.size()) +
                              " < " + std::to_string(needed) + ")");
        }
        // Per-class deterministic shuffle, then a disjoint train/test split.
        std::vector<Index> order = indices;
        RngStream rng = base.substream(static_cast<std::uint64_t>(label));
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
            std::swap(order[i], order[j]);
        }
        for (Index i = 0; i < config.per_class_train; ++i) {
            out.train.features.row(row++) =
                pooled_features(order[static_cast<std::size_t>(i)]).transpose();
            out.train.labels.push_back(relabel.at(label));
        }
        for (Index i = 0; i < config.per_class_test; ++i) {
            const Index image = order[static_cast<std::size_t>(config.per_class_train + i)];
            out.test.push_back({pooled_features(image), relabel.at(label)});
        }
    }
    return out;
}

}  // namespace btda::harness
