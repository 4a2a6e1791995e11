#include "cpg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "cpg/error.hpp"

namespace cpg::data {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t at, const std::filesystem::path& path) {
    if (at + 4 > buf.size()) throw DataError(path.string() + ": truncated header");
    return (std::uint32_t{buf[at]} << 24) | (std::uint32_t{buf[at + 1]} << 16) | (std::uint32_t{buf[at + 2]} << 8) |
           std::uint32_t{buf[at + 3]};
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

// Keeps the first 80% of every class (in row order) for training.
std::pair<Dataset, Dataset> split_80_20(const Dataset& d) {
    std::vector<std::vector<std::size_t>> by_class(d.n_classes);
    for (std::size_t i = 0; i < d.size(); ++i) by_class[static_cast<std::size_t>(d.labels[i])].push_back(i);
    std::vector<std::size_t> train, eval;
    for (const auto& rows : by_class) {
        const std::size_t cut = rows.size() * 4 / 5;
        train.insert(train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(cut));
        eval.insert(eval.end(), rows.begin() + static_cast<std::ptrdiff_t>(cut), rows.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(eval.begin(), eval.end());
    return {d.subset(train), d.subset(eval)};
}

Dataset select_classes(const Dataset& d, const std::vector<int>& classes) {
    std::vector<int> remap(d.n_classes, -1);
    for (std::size_t i = 0; i < classes.size(); ++i) remap[static_cast<std::size_t>(classes[i])] = static_cast<int>(i);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (remap[static_cast<std::size_t>(d.labels[i])] >= 0) rows.push_back(i);
    if (rows.empty()) throw DataError("no samples for a task's classes");
    Dataset out = d.subset(rows);
    for (auto& y : out.labels) y = remap[static_cast<std::size_t>(y)];
    out.n_classes = classes.size();
    return out;
}

void reorder(TaskSequence& seq, std::uint64_t order_seed) {
    seq.order = task_order(seq.tasks.size(), order_seed);
    std::vector<Task> permuted;
    permuted.reserve(seq.tasks.size());
    for (auto i : seq.order) permuted.push_back(std::move(seq.tasks[i]));
    seq.tasks = std::move(permuted);
    seq.seed = order_seed;
}

}  // namespace

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    if (indices.empty()) throw DataError("empty subset");
    Dataset out;
    out.n_classes = n_classes;
    auto dims = samples.dims;
    dims[0] = indices.size();
    std::vector<float> data;
    data.reserve(indices.size() * feature_width());
    out.labels.reserve(indices.size());
    for (auto i : indices) {
        auto r = samples.row(i);
        data.insert(data.end(), r.begin(), r.end());
        out.labels.push_back(labels.at(i));
    }
    out.samples = nn::Tensor(std::move(dims), std::move(data));
    return out;
}

void validate(const Dataset& d) {
    if (d.labels.empty()) throw DataError("dataset is empty");
    if (d.samples.rows() != d.labels.size()) throw DataError("sample and label counts differ");
    if (d.n_classes == 0) throw DataError("dataset declares zero classes");
    for (int y : d.labels)
        if (y < 0 || static_cast<std::size_t>(y) >= d.n_classes)
            throw DataError("label " + std::to_string(y) + " outside [0, " + std::to_string(d.n_classes) + ")");
}

std::vector<std::size_t> task_order(std::size_t n_tasks, std::uint64_t order_seed) {
    std::vector<std::size_t> order(n_tasks);
    std::iota(order.begin(), order.end(), 0);
    if (order_seed != 0) {
        std::mt19937_64 rng(order_seed);
        std::shuffle(order.begin(), order.end(), rng);
    }
    return order;
}

TaskSequence split_by_class(const Dataset& train, const Dataset& eval, std::size_t classes_per_task,
                            std::uint64_t order_seed) {
    validate(train);
    validate(eval);
    if (train.n_classes != eval.n_classes) throw DataError("train and eval class counts differ");
    if (train.feature_width() != eval.feature_width()) throw DataError("train and eval feature widths differ");
    if (classes_per_task == 0 || train.n_classes % classes_per_task != 0)
        throw DataError(std::to_string(train.n_classes) + " classes cannot be split into tasks of " +
                        std::to_string(classes_per_task));
    TaskSequence seq;
    const std::size_t n_tasks = train.n_classes / classes_per_task;
    for (std::size_t t = 0; t < n_tasks; ++t) {
        std::vector<int> classes(classes_per_task);
        std::iota(classes.begin(), classes.end(), static_cast<int>(t * classes_per_task));
        seq.tasks.push_back({select_classes(train, classes), select_classes(eval, classes), classes});
    }
    reorder(seq, order_seed);
    return seq;
}

TaskSequence split_by_class(const Dataset& dataset, std::size_t classes_per_task, std::uint64_t order_seed) {
    validate(dataset);
    auto [train, eval] = split_80_20(dataset);
    return split_by_class(train, eval, classes_per_task, order_seed);
}

TaskSequence gen_synthetic_tasks(std::size_t n_tasks, std::size_t classes_per_task, std::size_t dim,
                                 std::size_t per_class, double sep, std::uint64_t seed) {
    if (n_tasks == 0 || classes_per_task == 0 || dim == 0)
        throw DataError("synthetic tasks need positive task count, class count and dimension");
    if (per_class < 5) throw DataError("synthetic tasks need at least 5 samples per class");
    if (!(sep >= 0.0) || !std::isfinite(sep)) throw DataError("separation must be finite and non-negative");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t n_train = per_class * 4 / 5;

    TaskSequence seq;
    seq.seed = seed;
    for (std::size_t t = 0; t < n_tasks; ++t) {
        std::vector<std::vector<double>> means(classes_per_task, std::vector<double>(dim));
        for (auto& m : means) {
            double norm = 0.0;
            do {
                norm = 0.0;
                for (auto& v : m) {
                    v = normal(rng);
                    norm += v * v;
                }
            } while (norm == 0.0);
            norm = std::sqrt(norm);
            for (auto& v : m) v = v / norm * sep;
        }
        std::vector<float> train, eval;
        std::vector<int> ytrain, yeval;
        for (std::size_t c = 0; c < classes_per_task; ++c) {
            for (std::size_t s = 0; s < per_class; ++s) {
                auto& dst = s < n_train ? train : eval;
                (s < n_train ? ytrain : yeval).push_back(static_cast<int>(c));
                for (std::size_t k = 0; k < dim; ++k) dst.push_back(static_cast<float>(means[c][k] + normal(rng)));
            }
        }
        Task task;
        task.train = {nn::Tensor({ytrain.size(), dim}, std::move(train)), std::move(ytrain), classes_per_task};
        task.eval = {nn::Tensor({yeval.size(), dim}, std::move(eval)), std::move(yeval), classes_per_task};
        task.classes.resize(classes_per_task);
        std::iota(task.classes.begin(), task.classes.end(), static_cast<int>(t * classes_per_task));
        seq.tasks.push_back(std::move(task));
    }
    seq.order = task_order(n_tasks, 0);
    return seq;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t n_classes) {
    const auto img = read_file(images);
    const auto lab = read_file(labels);
    if (read_be32(img, 0, images) != 0x00000803) throw DataError(images.string() + ": bad IDX image magic");
    if (read_be32(lab, 0, labels) != 0x00000801) throw DataError(labels.string() + ": bad IDX label magic");
    const std::size_t n = read_be32(img, 4, images);
    const std::size_t rows = read_be32(img, 8, images);
    const std::size_t cols = read_be32(img, 12, images);
    const std::size_t nl = read_be32(lab, 4, labels);
    if (n != nl) throw DataError("IDX image count " + std::to_string(n) + " != label count " + std::to_string(nl));
    if (n == 0 || rows == 0 || cols == 0) throw DataError(images.string() + ": empty IDX image file");
    if (img.size() != 16 + n * rows * cols) throw DataError(images.string() + ": truncated or oversized payload");
    if (lab.size() != 8 + n) throw DataError(labels.string() + ": truncated or oversized payload");

    Dataset d;
    d.n_classes = n_classes;
    std::vector<float> px(n * rows * cols);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<float>(img[16 + i]) / 255.0f;
    d.samples = nn::Tensor({n, rows, cols}, std::move(px));
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.labels[i] = lab[8 + i];
    validate(d);
    return d;
}

Dataset load_csv(const std::filesystem::path& path, std::size_t n_classes) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": missing header");
    const auto header = split_fields(line);
    const auto label_it = std::find(header.begin(), header.end(), "label");
    if (label_it == header.end()) throw DataError(path.string() + ": no `label` column");
    const auto label_col = static_cast<std::size_t>(label_it - header.begin());
    const std::size_t width = header.size() - 1;
    if (width == 0) throw DataError(path.string() + ": no feature columns");

    std::vector<float> values;
    std::vector<int> ys;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != header.size())
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields");
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const auto f = fields[c];
            if (c == label_col) {
                int y = 0;
                auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), y);
                if (ec != std::errc() || p != f.data() + f.size())
                    throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad label");
                ys.push_back(y);
            } else {
                float v = 0.0f;
                auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
                if (ec != std::errc() || p != f.data() + f.size() || !std::isfinite(v))
                    throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad value");
                values.push_back(v);
            }
        }
    }
    if (ys.empty()) throw DataError(path.string() + ": no data rows");
    Dataset d;
    if (n_classes == 0) {
        const int top = *std::max_element(ys.begin(), ys.end());
        n_classes = top < 0 ? 0 : static_cast<std::size_t>(top) + 1;
    }
    d.n_classes = n_classes;
    d.samples = nn::Tensor({ys.size(), width}, std::move(values));
    d.labels = std::move(ys);
    validate(d);
    return d;
}

std::vector<Batch> batch_iter(const Dataset& dataset, std::size_t batch_size, std::uint64_t epoch_seed) {
    if (batch_size == 0) throw DataError("batch size must be at least 1");
    std::vector<std::size_t> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(epoch_seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    const std::size_t width = dataset.feature_width();
    std::vector<Batch> out;
    for (std::size_t start = 0; start < idx.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, idx.size() - start);
        Batch b;
        std::vector<float> data;
        data.reserve(n * width);
        for (std::size_t k = start; k < start + n; ++k) {
            auto r = dataset.samples.row(idx[k]);
            data.insert(data.end(), r.begin(), r.end());
            b.labels.push_back(dataset.labels[idx[k]]);
        }
        b.samples = nn::Tensor({n, width}, std::move(data));
        out.push_back(std::move(b));
    }
    return out;
}

}  // namespace cpg::data
