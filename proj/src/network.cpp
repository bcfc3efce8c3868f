#include "reinverify/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace reinverify {

IntervalBox::IntervalBox(std::vector<double> lo, std::vector<double> hi)
    : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size())
        throw DimensionError("interval box bound vectors differ in length");
    for (std::size_t i = 0; i < lower.size(); ++i)
        if (lower[i] > upper[i])
            throw DimensionError("interval box has lower[" + std::to_string(i) +
                                 "] > upper[" + std::to_string(i) + "]");
}

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw DimensionError("network has no layers");
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        if (l.rows() == 0 || l.cols() == 0)
            throw DimensionError("layer " + std::to_string(li) + " is empty");
        for (const auto& row : l.weights)
            if (row.size() != l.cols())
                throw DimensionError("layer " + std::to_string(li) + " has ragged weight rows");
        if (l.bias.size() != l.rows())
            throw DimensionError("layer " + std::to_string(li) + " bias length " +
                                 std::to_string(l.bias.size()) + " != rows " +
                                 std::to_string(l.rows()));
        if (li > 0 && l.cols() != layers_[li - 1].rows())
            throw DimensionError("layer " + std::to_string(li) + " input dim " +
                                 std::to_string(l.cols()) + " != previous output dim " +
                                 std::to_string(layers_[li - 1].rows()));
        if (l.activation == Activation::Tanh) has_tanh_ = true;
    }
    if (layers_.back().activation != Activation::Identity)
        throw DimensionError("final layer activation must be identity");
    input_dim_ = static_cast<int>(layers_.front().cols());
    output_dim_ = static_cast<int>(layers_.back().rows());
}

std::vector<double> Network::forward(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != input_dim_)
        throw DimensionError("forward: input length " + std::to_string(x.size()) +
                             " != network input dim " + std::to_string(input_dim_));
    std::vector<double> cur = x;
    for (const Layer& l : layers_) {
        std::vector<double> next(l.rows());
        for (std::size_t r = 0; r < l.rows(); ++r) {
            double acc = l.bias[r];
            for (std::size_t c = 0; c < l.cols(); ++c) acc += l.weights[r][c] * cur[c];
            switch (l.activation) {
                case Activation::Relu: next[r] = acc > 0 ? acc : 0; break;
                case Activation::Tanh: next[r] = std::tanh(acc); break;
                case Activation::Identity: next[r] = acc; break;
            }
        }
        cur = std::move(next);
    }
    return cur;
}

IntervalBox Network::interval_propagate(const IntervalBox& box) const {
    if (static_cast<int>(box.size()) != input_dim_)
        throw DimensionError("interval_propagate: box size != network input dim");
    std::vector<double> lo = box.lower, hi = box.upper;
    for (const Layer& l : layers_) {
        std::vector<double> nlo(l.rows()), nhi(l.rows());
        for (std::size_t r = 0; r < l.rows(); ++r) {
            double a = l.bias[r], b = l.bias[r];
            for (std::size_t c = 0; c < l.cols(); ++c) {
                double w = l.weights[r][c];
                if (w >= 0) {
                    a += w * lo[c];
                    b += w * hi[c];
                } else {
                    a += w * hi[c];
                    b += w * lo[c];
                }
            }
            switch (l.activation) {
                case Activation::Relu:
                    a = a > 0 ? a : 0;
                    b = b > 0 ? b : 0;
                    break;
                case Activation::Tanh:
                    a = std::tanh(a);
                    b = std::tanh(b);
                    break;
                case Activation::Identity: break;
            }
            nlo[r] = a;
            nhi[r] = b;
        }
        lo = std::move(nlo);
        hi = std::move(nhi);
    }
    return IntervalBox(std::move(lo), std::move(hi));
}

int Network::relu_count() const {
    int count = 0;
    for (const Layer& l : layers_)
        if (l.activation == Activation::Relu) count += static_cast<int>(l.rows());
    return count;
}

namespace {

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "identity" || s == "linear") return Activation::Identity;
    throw FormatError("unknown activation '" + s + "'");
}

const char* activation_to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "identity";
}

// Token reader over the text format that tracks byte offsets so parse
// failures can point at the offending input.
class TextReader {
  public:
    explicit TextReader(const std::string& content) : s_(content) {}

    double next_number(const char* what) {
        skip();
        if (pos_ >= s_.size())
            throw FormatError(std::string("unexpected end of file, expected ") + what,
                              static_cast<long>(pos_));
        std::size_t start = pos_;
        while (pos_ < s_.size() && !is_sep(s_[pos_])) ++pos_;
        try {
            std::size_t used = 0;
            double v = std::stod(s_.substr(start, pos_ - start), &used);
            if (used != pos_ - start) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw FormatError(std::string("expected ") + what + ", got '" +
                                  s_.substr(start, pos_ - start) + "'",
                              static_cast<long>(start));
        }
    }

    int next_int(const char* what) {
        double v = next_number(what);
        int i = static_cast<int>(std::llround(v));
        if (std::abs(v - i) > 1e-9)
            throw FormatError(std::string("expected integer for ") + what,
                              static_cast<long>(pos_));
        return i;
    }

    bool at_end() {
        skip();
        return pos_ >= s_.size();
    }

  private:
    static bool is_sep(char c) { return c == ',' || std::isspace(static_cast<unsigned char>(c)); }

    void skip() {
        for (;;) {
            while (pos_ < s_.size() && is_sep(s_[pos_])) ++pos_;
            if (pos_ + 1 < s_.size() && s_[pos_] == '/' && s_[pos_ + 1] == '/') {
                while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
                continue;
            }
            break;
        }
    }

    const std::string& s_;
    std::size_t pos_ = 0;
};

}  // namespace

// Plain-text layout: layer count L, then L+1 layer sizes, then per layer the
// row-major weight matrix followed by the bias vector. Hidden layers are
// ReLU, the last layer identity; Tanh models use the JSON format instead.
// "//" comment lines and comma separators are accepted.
Network parse_network_text(const std::string& content) {
    TextReader rd(content);
    int num_layers = rd.next_int("layer count");
    if (num_layers < 1) throw FormatError("layer count must be >= 1");
    std::vector<int> sizes(num_layers + 1);
    for (int i = 0; i <= num_layers; ++i) {
        sizes[i] = rd.next_int("layer size");
        if (sizes[i] < 1) throw FormatError("layer sizes must be >= 1");
    }
    std::vector<Layer> layers(num_layers);
    for (int li = 0; li < num_layers; ++li) {
        Layer& l = layers[li];
        l.activation = (li + 1 == num_layers) ? Activation::Identity : Activation::Relu;
        l.weights.assign(sizes[li + 1], std::vector<double>(sizes[li]));
        for (int r = 0; r < sizes[li + 1]; ++r)
            for (int c = 0; c < sizes[li]; ++c) l.weights[r][c] = rd.next_number("weight");
        l.bias.resize(sizes[li + 1]);
        for (int r = 0; r < sizes[li + 1]; ++r) l.bias[r] = rd.next_number("bias");
    }
    if (!rd.at_end()) throw FormatError("trailing data after final bias vector");
    return Network(std::move(layers));
}

Network parse_network_json(const std::string& content) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(content);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("invalid JSON: ") + e.what(), static_cast<long>(e.byte));
    }
    if (!j.contains("layers") || !j["layers"].is_array())
        throw FormatError("network JSON must contain a 'layers' array");
    std::vector<Layer> layers;
    for (const auto& jl : j["layers"]) {
        Layer l;
        for (const auto& row : jl.at("weights")) l.weights.push_back(row.get<std::vector<double>>());
        l.bias = jl.at("bias").get<std::vector<double>>();
        l.activation = activation_from_string(jl.value("activation", "identity"));
        layers.push_back(std::move(l));
    }
    return Network(std::move(layers));
}

Network load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open network file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string content = buf.str();
    std::size_t p = content.find_first_not_of(" \t\r\n");
    if (p != std::string::npos && (content[p] == '{' || content[p] == '['))
        return parse_network_json(content);
    return parse_network_text(content);
}

std::string network_to_text(const Network& net) {
    std::ostringstream out;
    out.precision(17);
    out << net.layers().size() << "\n";
    out << net.input_dim();
    for (const Layer& l : net.layers()) out << " " << l.rows();
    out << "\n";
    for (const Layer& l : net.layers()) {
        for (const auto& row : l.weights) {
            for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << row[c];
            out << "\n";
        }
        for (std::size_t r = 0; r < l.bias.size(); ++r) out << (r ? " " : "") << l.bias[r];
        out << "\n";
    }
    return out.str();
}

std::string network_to_json(const Network& net) {
    nlohmann::json j;
    j["layers"] = nlohmann::json::array();
    for (const Layer& l : net.layers()) {
        nlohmann::json jl;
        jl["weights"] = l.weights;
        jl["bias"] = l.bias;
        jl["activation"] = activation_to_string(l.activation);
        j["layers"].push_back(jl);
    }
    return j.dump(2);
}

UnrolledNetwork::UnrolledNetwork(const Network& base, int depth) : base_(&base), depth_(depth) {
    if (depth < 1) throw DimensionError("unroll depth must be >= 1");
}

int UnrolledNetwork::input_id(int step, int feature) const {
    if (step < 0 || step >= depth_)
        throw DimensionError("input step " + std::to_string(step) + " out of range [0," +
                             std::to_string(depth_) + ")");
    if (feature < 0 || feature >= base_->input_dim())
        throw DimensionError("input feature " + std::to_string(feature) + " out of range");
    return step * (base_->input_dim() + base_->output_dim()) + feature;
}

int UnrolledNetwork::output_id(int step, int feature) const {
    if (step < 0 || step >= depth_)
        throw DimensionError("output step " + std::to_string(step) + " out of range [0," +
                             std::to_string(depth_) + ")");
    if (feature < 0 || feature >= base_->output_dim())
        throw DimensionError("output feature " + std::to_string(feature) + " out of range");
    return step * (base_->input_dim() + base_->output_dim()) + base_->input_dim() + feature;
}

}  // namespace reinverify
