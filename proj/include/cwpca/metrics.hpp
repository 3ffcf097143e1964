#pragma once

#include "cwpca/error.hpp"
#include "cwpca/hsio.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace cwpca {

struct EvalReport {
    int n_classes = 0;
    /// confusion[t][p]: pixels of true class t+1 predicted as p+1.
    std::vector<std::vector<std::size_t>> confusion;
    std::size_t total = 0;
    double overall_accuracy = 0.0;
    double average_accuracy = 0.0;
    /// NaN for classes with no test pixels.
    std::vector<double> per_class_accuracy;
    std::vector<std::size_t> per_class_count;
    /// Classes left out of AA because they had no test pixels.
    std::vector<int> excluded_classes;
    std::vector<int> weak_class_ids;
    std::vector<std::string> class_names;
    std::string method;
    nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
};

inline EvalReport evaluate(const std::vector<int>& truth, const std::vector<int>& predicted, int n_classes) {
    if (truth.size() != predicted.size()) throw Error(ErrorCode::LengthMismatch, "truth and prediction differ in length");
    if (truth.empty()) throw Error(ErrorCode::EmptyInput, "no test samples");
    if (n_classes < 1) throw Error(ErrorCode::LabelOutOfRange, "n_classes must be positive");

    EvalReport r;
    r.n_classes = n_classes;
    r.confusion.assign(static_cast<std::size_t>(n_classes), std::vector<std::size_t>(static_cast<std::size_t>(n_classes), 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i];
        const int p = predicted[i];
        if (t < 1 || t > n_classes || p < 1 || p > n_classes) {
            throw Error(ErrorCode::LabelOutOfRange, "label pair (" + std::to_string(t) + ", " + std::to_string(p) + ")");
        }
        ++r.confusion[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(p - 1)];
    }
    r.total = truth.size();

    std::size_t correct = 0;
    double acc_sum = 0.0;
    int acc_n = 0;
    for (int c = 0; c < n_classes; ++c) {
        const auto& row = r.confusion[static_cast<std::size_t>(c)];
        std::size_t row_sum = 0;
        for (auto v : row) row_sum += v;
        correct += row[static_cast<std::size_t>(c)];
        r.per_class_count.push_back(row_sum);
        if (row_sum == 0) {
            r.per_class_accuracy.push_back(std::numeric_limits<double>::quiet_NaN());
            r.excluded_classes.push_back(c + 1);
        } else {
            const double a = static_cast<double>(row[static_cast<std::size_t>(c)]) / static_cast<double>(row_sum);
            r.per_class_accuracy.push_back(a);
            acc_sum += a;
            ++acc_n;
        }
    }
    r.overall_accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
    r.average_accuracy = acc_sum / acc_n;
    return r;
}

/// Classes whose share of all labeled pixels is below `threshold_fraction`,
/// ascending.
inline std::vector<int> weak_classes(const LabelRaster& raster, double threshold_fraction = 0.01) {
    if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0)) {
        throw Error(ErrorCode::ConfigInvalid, "threshold_fraction must lie in (0, 1)");
    }
    const auto hist = raster.class_histogram();
    std::size_t labeled = 0;
    for (std::size_t c = 1; c < hist.size(); ++c) labeled += hist[c];
    std::vector<int> out;
    if (labeled == 0) return out;
    for (std::size_t c = 1; c < hist.size(); ++c) {
        if (static_cast<double>(hist[c]) / static_cast<double>(labeled) < threshold_fraction) {
            out.push_back(static_cast<int>(c));
        }
    }
    return out;
}

namespace detail {

inline nlohmann::ordered_json nullable(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json();
}

inline std::string fixed(double v, int digits = 6) {
    if (!std::isfinite(v)) return "";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + '"';
}

} // namespace detail

inline std::string class_label(const EvalReport& r, int c) {
    if (c >= 1 && static_cast<std::size_t>(c) <= r.class_names.size()) return r.class_names[static_cast<std::size_t>(c - 1)];
    return "class_" + std::to_string(c);
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["n_classes"] = r.n_classes;
    j["total"] = r.total;
    j["overall_accuracy"] = r.overall_accuracy;
    j["average_accuracy"] = r.average_accuracy;
    auto& classes = j["classes"] = nlohmann::ordered_json::array();
    for (int c = 1; c <= r.n_classes; ++c) {
        nlohmann::ordered_json e;
        e["class_id"] = c;
        e["name"] = class_label(r, c);
        e["n_test"] = r.per_class_count[static_cast<std::size_t>(c - 1)];
        e["accuracy"] = detail::nullable(r.per_class_accuracy[static_cast<std::size_t>(c - 1)]);
        classes.push_back(std::move(e));
    }
    j["excluded_from_aa"] = r.excluded_classes;
    j["weak_class_ids"] = r.weak_class_ids;
    j["confusion"] = r.confusion;
    j["metadata"] = r.metadata;
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    try {
        EvalReport r;
        r.method = j.at("method").get<std::string>();
        r.n_classes = j.at("n_classes").get<int>();
        r.total = j.at("total").get<std::size_t>();
        r.overall_accuracy = j.at("overall_accuracy").get<double>();
        r.average_accuracy = j.at("average_accuracy").get<double>();
        for (const auto& e : j.at("classes")) {
            r.class_names.push_back(e.at("name").get<std::string>());
            r.per_class_count.push_back(e.at("n_test").get<std::size_t>());
            const auto& a = e.at("accuracy");
            r.per_class_accuracy.push_back(a.is_null() ? std::numeric_limits<double>::quiet_NaN() : a.get<double>());
        }
        r.excluded_classes = j.at("excluded_from_aa").get<std::vector<int>>();
        r.weak_class_ids = j.at("weak_class_ids").get<std::vector<int>>();
        r.confusion = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
        if (j.contains("metadata")) r.metadata = j.at("metadata");
        if (r.per_class_accuracy.size() != static_cast<std::size_t>(r.n_classes)) {
            throw Error(ErrorCode::FormatError, "report class table does not match n_classes");
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, std::string("report: ") + e.what());
    }
}

/// class_id,name,n_test,accuracy
inline std::string per_class_csv(const EvalReport& r) {
    std::string out = "class_id,name,n_test,accuracy\n";
    for (int c = 1; c <= r.n_classes; ++c) {
        out += std::to_string(c) + ',' + detail::csv_escape(class_label(r, c)) + ',' +
               std::to_string(r.per_class_count[static_cast<std::size_t>(c - 1)]) + ',' +
               detail::fixed(r.per_class_accuracy[static_cast<std::size_t>(c - 1)]) + '\n';
    }
    return out;
}

} // namespace cwpca
