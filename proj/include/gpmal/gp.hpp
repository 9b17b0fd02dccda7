#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gpmal/data_io.hpp"
#include "gpmal/error.hpp"
#include "gpmal/matrix.hpp"
#include "gpmal/random.hpp"

namespace gpmal {

inline constexpr std::size_t kMinTreeDepth = 2;
inline constexpr std::size_t kMaxTreeDepth = 14;
inline constexpr std::size_t kInitMaxDepth = 6;

enum class Op : std::uint8_t { Add5, Sub, Mul, Div, Sigmoid, Relu, Max, Min, If, Terminal };

inline constexpr std::array<Op, 9> kFunctionOps{Op::Add5, Op::Sub,  Op::Mul, Op::Div, Op::Sigmoid,
                                                 Op::Relu, Op::Max, Op::Min, Op::If};

constexpr std::size_t arity(Op op) noexcept {
    switch (op) {
        case Op::Add5: return 5;
        case Op::Sub:
        case Op::Mul:
        case Op::Div:
        case Op::Max:
        case Op::Min: return 2;
        case Op::Sigmoid:
        case Op::Relu: return 1;
        case Op::If: return 3;
        case Op::Terminal: return 0;
    }
    return 0;
}

constexpr std::string_view op_name(Op op) noexcept {
    switch (op) {
        case Op::Add5: return "add5";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Div: return "div";
        case Op::Sigmoid: return "sigmoid";
        case Op::Relu: return "relu";
        case Op::Max: return "max";
        case Op::Min: return "min";
        case Op::If: return "if";
        case Op::Terminal: return "f";
    }
    return "?";
}

inline std::optional<Op> op_from_name(std::string_view name) {
    for (Op op : kFunctionOps)
        if (op_name(op) == name) return op;
    return std::nullopt;
}

/// One node of an expression tree: a function tag, or a terminal reading feature `feature`.
struct Primitive {
    Op op = Op::Terminal;
    std::uint32_t feature = 0;

    static constexpr Primitive terminal(std::uint32_t j) noexcept { return {Op::Terminal, j}; }
    static constexpr Primitive function(Op op) noexcept { return {op, 0}; }

    constexpr std::size_t arity() const noexcept { return gpmal::arity(op); }
    constexpr bool is_terminal() const noexcept { return op == Op::Terminal; }

    friend constexpr bool operator==(const Primitive&, const Primitive&) = default;
};

namespace detail {

inline double finite(double v) noexcept {
    constexpr double big = std::numeric_limits<double>::max();
    return std::clamp(v, -big, big);
}

inline double sigmoid(double a) noexcept {
    if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
    const double e = std::exp(a);
    return e / (1.0 + e);
}

inline double protected_div(double a, double b) noexcept { return b == 0.0 ? 1.0 : finite(a / b); }

}  // namespace detail

/// Applies a function primitive to its inputs. Overflowing results saturate at
/// +/-DBL_MAX so evaluation stays finite.
inline double eval_primitive(Primitive p, std::span<const double> in) {
    if (p.is_terminal()) throw Error("eval_primitive: terminals are evaluated against an instance");
    if (in.size() != p.arity())
        throw Error("eval_primitive: " + std::string(op_name(p.op)) + " expects " + std::to_string(p.arity()) +
                    " inputs, got " + std::to_string(in.size()));
    switch (p.op) {
        case Op::Add5: return detail::finite(in[0] + in[1] + in[2] + in[3] + in[4]);
        case Op::Sub: return detail::finite(in[0] - in[1]);
        case Op::Mul: return detail::finite(in[0] * in[1]);
        case Op::Div: return detail::protected_div(in[0], in[1]);
        case Op::Sigmoid: return detail::sigmoid(in[0]);
        case Op::Relu: return std::max(0.0, in[0]);
        case Op::Max: return std::max(in[0], in[1]);
        case Op::Min: return std::min(in[0], in[1]);
        case Op::If: return in[0] > 0.0 ? in[1] : in[2];
        case Op::Terminal: break;
    }
    return 0.0;
}

/// Expression tree stored as a prefix (pre-order) node sequence.
class Tree {
public:
    explicit Tree(std::vector<Primitive> prefix) : nodes_(std::move(prefix)) {
        if (nodes_.empty()) throw Error("tree must contain at least one node");
        if (subtree_end(0) != nodes_.size()) throw Error("node sequence is not a single well-formed tree");
    }

    static Tree terminal(std::uint32_t feature) { return Tree({Primitive::terminal(feature)}); }

    std::span<const Primitive> nodes() const noexcept { return nodes_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    const Primitive& root() const noexcept { return nodes_.front(); }

    /// One past the last node of the subtree rooted at `pos`. Returns a value
    /// past size() when the sequence is truncated.
    std::size_t subtree_end(std::size_t pos) const noexcept {
        std::size_t need = 1;
        while (need > 0) {
            if (pos >= nodes_.size()) return nodes_.size() + 1;
            need += nodes_[pos].arity();
            --need;
            ++pos;
        }
        return pos;
    }

    Tree subtree(std::size_t pos) const {
        return Tree(std::vector<Primitive>(nodes_.begin() + static_cast<std::ptrdiff_t>(pos),
                                           nodes_.begin() + static_cast<std::ptrdiff_t>(subtree_end(pos))));
    }

    /// Copy with the subtree at `pos` replaced by `replacement`.
    Tree with_subtree(std::size_t pos, const Tree& replacement) const {
        std::vector<Primitive> out;
        out.reserve(nodes_.size() + replacement.size());
        out.insert(out.end(), nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(pos));
        out.insert(out.end(), replacement.nodes_.begin(), replacement.nodes_.end());
        out.insert(out.end(), nodes_.begin() + static_cast<std::ptrdiff_t>(subtree_end(pos)), nodes_.end());
        return Tree(std::move(out));
    }

    /// Edge distance from the root for each node; a lone terminal has depth 0.
    std::vector<std::size_t> node_depths() const {
        std::vector<std::size_t> depth(nodes_.size());
        struct Open {
            std::size_t index;
            std::size_t remaining;
        };
        std::vector<Open> open;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            depth[i] = open.empty() ? 0 : depth[open.back().index] + 1;
            if (!open.empty()) --open.back().remaining;
            if (nodes_[i].arity() > 0) open.push_back({i, nodes_[i].arity()});
            while (!open.empty() && open.back().remaining == 0) open.pop_back();
        }
        return depth;
    }

    std::size_t depth() const {
        const auto d = node_depths();
        return *std::max_element(d.begin(), d.end());
    }

    std::uint32_t max_feature() const noexcept {
        std::uint32_t hi = 0;
        for (const auto& p : nodes_)
            if (p.is_terminal()) hi = std::max(hi, p.feature);
        return hi;
    }

    friend bool operator==(const Tree&, const Tree&) = default;

private:
    std::vector<Primitive> nodes_;
};

/// Ordered list of trees; tree j produces embedding dimension j.
class Individual {
public:
    explicit Individual(std::vector<Tree> trees) : trees_(std::move(trees)) {
        if (trees_.empty()) throw Error("an individual needs at least one tree");
    }

    const std::vector<Tree>& trees() const noexcept { return trees_; }
    const Tree& tree(std::size_t j) const noexcept { return trees_[j]; }
    std::size_t size() const noexcept { return trees_.size(); }

    std::optional<double> cost() const noexcept { return cost_; }
    void set_cost(double c) noexcept { cost_ = c; }

    /// Structural equality; the cached cost is ignored.
    friend bool operator==(const Individual& a, const Individual& b) { return a.trees_ == b.trees_; }

private:
    std::vector<Tree> trees_;
    std::optional<double> cost_;
};

/// max(2, ceil(m / 2))
constexpr std::size_t default_t_max(std::size_t num_features) noexcept {
    return std::max<std::size_t>(2, (num_features + 1) / 2);
}

/// Every representation invariant the operators must preserve. Empty when valid.
inline std::vector<std::string> invariant_violations(const Individual& ind, std::size_t t_max,
                                                     std::size_t num_features,
                                                     std::size_t max_depth = kMaxTreeDepth) {
    std::vector<std::string> out;
    if (ind.size() < 1 || ind.size() > t_max)
        out.push_back("tree count " + std::to_string(ind.size()) + " outside [1," + std::to_string(t_max) + "]");
    for (std::size_t j = 0; j < ind.size(); ++j) {
        const Tree& t = ind.tree(j);
        if (t.subtree_end(0) != t.size()) out.push_back("tree " + std::to_string(j) + " is malformed");
        const auto depths = t.node_depths();
        for (std::size_t i = 0; i < t.size(); ++i) {
            const auto& p = t.nodes()[i];
            if (p.is_terminal() && p.feature >= num_features)
                out.push_back("tree " + std::to_string(j) + " reads feature " + std::to_string(p.feature));
            if (depths[i] == max_depth && !p.is_terminal())
                out.push_back("tree " + std::to_string(j) + " has a function at the depth limit");
        }
        if (t.depth() > max_depth)
            out.push_back("tree " + std::to_string(j) + " depth " + std::to_string(t.depth()) + " exceeds limit");
    }
    return out;
}

namespace detail {

inline double eval_at(std::span<const Primitive> nodes, std::size_t& pos, std::span<const double> x) {
    const Primitive p = nodes[pos++];
    if (p.is_terminal()) return x[p.feature];
    std::array<double, 5> in{};
    for (std::size_t c = 0; c < p.arity(); ++c) in[c] = eval_at(nodes, pos, x);
    return eval_primitive(p, std::span<const double>(in.data(), p.arity()));
}

}  // namespace detail

/// Evaluates a tree on one instance row.
inline double eval_tree(const Tree& t, std::span<const double> x) {
    std::size_t pos = 0;
    return detail::eval_at(t.nodes(), pos, x);
}

/// Evaluates trees over all instances at once, one column buffer per
/// intermediate result. Feature columns are stored contiguously.
class ColumnEvaluator {
public:
    explicit ColumnEvaluator(const Matrix& features)
        : n_(features.rows()), m_(features.cols()), columns_(features.rows() * features.cols()) {
        for (std::size_t r = 0; r < n_; ++r)
            for (std::size_t c = 0; c < m_; ++c) columns_[c * n_ + r] = features(r, c);
    }

    std::size_t num_instances() const noexcept { return n_; }
    std::size_t num_features() const noexcept { return m_; }

    void evaluate(const Tree& tree, std::span<double> out) {
        const auto nodes = tree.nodes();
        stack_.clear();
        for (std::size_t i = nodes.size(); i-- > 0;) {
            const Primitive p = nodes[i];
            if (p.is_terminal()) {
                if (p.feature >= m_) throw Error("terminal reads feature " + std::to_string(p.feature) +
                                                 " but the dataset has " + std::to_string(m_));
                stack_.push_back({columns_.data() + p.feature * n_, -1});
                continue;
            }
            const std::size_t k = p.arity();
            std::array<Slot, 5> args;
            for (std::size_t c = 0; c < k; ++c) {
                args[c] = stack_.back();
                stack_.pop_back();
            }
            int target = -1;
            for (std::size_t c = 0; c < k && target < 0; ++c)
                if (args[c].buffer >= 0) target = args[c].buffer;
            if (target < 0) target = acquire();
            double* dst = buffers_[static_cast<std::size_t>(target)].data();
            apply(p.op, args, dst);
            for (std::size_t c = 0; c < k; ++c)
                if (args[c].buffer >= 0 && args[c].buffer != target) free_.push_back(args[c].buffer);
            stack_.push_back({dst, target});
        }
        const Slot result = stack_.back();
        std::copy(result.data, result.data + n_, out.begin());
        if (result.buffer >= 0) free_.push_back(result.buffer);
    }

    /// n x t embedding, one column per tree.
    Matrix embed(const Individual& ind) {
        Matrix out(n_, ind.size());
        column_.resize(n_);
        for (std::size_t j = 0; j < ind.size(); ++j) {
            evaluate(ind.tree(j), column_);
            for (std::size_t r = 0; r < n_; ++r) out(r, j) = column_[r];
        }
        return out;
    }

private:
    struct Slot {
        const double* data = nullptr;
        int buffer = -1;
    };

    int acquire() {
        if (!free_.empty()) {
            const int b = free_.back();
            free_.pop_back();
            return b;
        }
        buffers_.emplace_back(n_);
        return static_cast<int>(buffers_.size() - 1);
    }

    void apply(Op op, const std::array<Slot, 5>& a, double* out) const noexcept {
        const std::size_t n = n_;
        const double* x0 = a[0].data;
        const double* x1 = a[1].data;
        const double* x2 = a[2].data;
        switch (op) {
            case Op::Add5: {
                const double* x3 = a[3].data;
                const double* x4 = a[4].data;
                for (std::size_t r = 0; r < n; ++r) out[r] = detail::finite(x0[r] + x1[r] + x2[r] + x3[r] + x4[r]);
                break;
            }
            case Op::Sub:
                for (std::size_t r = 0; r < n; ++r) out[r] = detail::finite(x0[r] - x1[r]);
                break;
            case Op::Mul:
                for (std::size_t r = 0; r < n; ++r) out[r] = detail::finite(x0[r] * x1[r]);
                break;
            case Op::Div:
                for (std::size_t r = 0; r < n; ++r) out[r] = detail::protected_div(x0[r], x1[r]);
                break;
            case Op::Sigmoid:
                for (std::size_t r = 0; r < n; ++r) out[r] = detail::sigmoid(x0[r]);
                break;
            case Op::Relu:
                for (std::size_t r = 0; r < n; ++r) out[r] = std::max(0.0, x0[r]);
                break;
            case Op::Max:
                for (std::size_t r = 0; r < n; ++r) out[r] = std::max(x0[r], x1[r]);
                break;
            case Op::Min:
                for (std::size_t r = 0; r < n; ++r) out[r] = std::min(x0[r], x1[r]);
                break;
            case Op::If:
                for (std::size_t r = 0; r < n; ++r) out[r] = x0[r] > 0.0 ? x1[r] : x2[r];
                break;
            case Op::Terminal: break;
        }
    }

    std::size_t n_;
    std::size_t m_;
    std::vector<double> columns_;
    std::vector<std::vector<double>> buffers_;
    std::vector<int> free_;
    std::vector<Slot> stack_;
    std::vector<double> column_;
};

/// Embedding of the dataset under `ind`: column j is tree j over every row.
inline Matrix apply_individual(const Individual& ind, const Dataset& d) {
    for (std::size_t j = 0; j < ind.size(); ++j)
        if (ind.tree(j).max_feature() >= d.num_features())
            throw Error("tree " + std::to_string(j) + " reads feature " + std::to_string(ind.tree(j).max_feature()) +
                        " but the dataset has " + std::to_string(d.num_features()));
    ColumnEvaluator eval(d.features());
    return eval.embed(ind);
}

// ---------------------------------------------------------------------------
// Generation

enum class GenMethod { Full, Grow };

namespace detail {

template <std::uniform_random_bit_generator G>
void generate_into(std::vector<Primitive>& out, GenMethod method, std::size_t depth, std::size_t target,
                   std::size_t min_depth, std::size_t num_features, G& rng) {
    bool terminal = depth >= target;
    if (!terminal && method == GenMethod::Grow && depth >= min_depth)
        terminal = uniform_index(rng, kFunctionOps.size() + 1) == kFunctionOps.size();
    if (terminal) {
        out.push_back(Primitive::terminal(static_cast<std::uint32_t>(uniform_index(rng, num_features))));
        return;
    }
    const Op op = kFunctionOps[uniform_index(rng, kFunctionOps.size())];
    out.push_back(Primitive::function(op));
    for (std::size_t c = 0; c < arity(op); ++c)
        generate_into(out, method, depth + 1, target, min_depth, num_features, rng);
}

}  // namespace detail

/// Random tree of the given depth. Full puts every leaf at `depth`; grow picks
/// uniformly among the nine functions and the terminal tag once past the
/// minimum depth, and forces terminals at `depth`.
template <std::uniform_random_bit_generator G>
Tree generate_tree(GenMethod method, std::size_t depth, std::size_t num_features, G& rng,
                   std::size_t min_depth = kMinTreeDepth) {
    if (depth > kMaxTreeDepth) throw ConfigError("tree depth above the limit of " + std::to_string(kMaxTreeDepth));
    if (num_features == 0) throw ConfigError("cannot generate trees without features");
    std::vector<Primitive> nodes;
    detail::generate_into(nodes, method, 0, depth, std::min(min_depth, depth), num_features, rng);
    return Tree(std::move(nodes));
}

/// Tree count uniform on {1..t_max}; trees ramped half-and-half over depths 2..6.
template <std::uniform_random_bit_generator G>
std::vector<Individual> init_population(std::size_t size, std::size_t t_max, std::size_t num_features, G& rng) {
    if (size < 1) throw ConfigError("population size must be at least 1");
    if (t_max < 1) throw ConfigError("t_max must be at least 1");
    std::vector<Individual> pop;
    pop.reserve(size);
    std::size_t counter = 0;
    constexpr std::size_t ramp = kInitMaxDepth - kMinTreeDepth + 1;
    for (std::size_t i = 0; i < size; ++i) {
        const std::size_t t = 1 + uniform_index(rng, t_max);
        std::vector<Tree> trees;
        for (std::size_t j = 0; j < t; ++j, ++counter) {
            const auto method = counter % 2 == 0 ? GenMethod::Full : GenMethod::Grow;
            trees.push_back(generate_tree(method, kMinTreeDepth + counter % ramp, num_features, rng));
        }
        pop.emplace_back(std::move(trees));
    }
    return pop;
}

// ---------------------------------------------------------------------------
// Text serialization: nested prefix expressions, one tree per line.

namespace detail {

inline void write_tree(std::ostream& out, std::span<const Primitive> nodes, std::size_t& pos) {
    const Primitive p = nodes[pos++];
    if (p.is_terminal()) {
        out << 'f' << p.feature;
        return;
    }
    out << '(' << op_name(p.op);
    for (std::size_t c = 0; c < p.arity(); ++c) {
        out << ' ';
        write_tree(out, nodes, pos);
    }
    out << ')';
}

class TreeReader {
public:
    TreeReader(std::string_view text, std::size_t num_features, std::size_t line)
        : text_(text), m_(num_features), line_(line) {}

    Tree read() {
        std::vector<Primitive> nodes;
        read_node(nodes);
        skip_space();
        if (pos_ != text_.size()) fail(ParseErrorKind::Malformed, "trailing text after tree");
        return Tree(std::move(nodes));
    }

private:
    [[noreturn]] void fail(ParseErrorKind kind, const std::string& what) const {
        throw ParseError(kind, "line " + std::to_string(line_) + ": " + what, line_);
    }

    void skip_space() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r')) ++pos_;
    }

    std::string_view atom() {
        skip_space();
        const std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != ' ' && text_[pos_] != '\t' && text_[pos_] != '(' &&
               text_[pos_] != ')' && text_[pos_] != '\r')
            ++pos_;
        return text_.substr(start, pos_ - start);
    }

    void read_node(std::vector<Primitive>& nodes) {
        skip_space();
        if (pos_ >= text_.size()) fail(ParseErrorKind::Malformed, "unexpected end of tree");
        if (text_[pos_] == ')') fail(ParseErrorKind::Malformed, "unexpected ')'");
        if (text_[pos_] != '(') {
            const auto tok = atom();
            if (tok.size() < 2 || tok[0] != 'f')
                fail(ParseErrorKind::Malformed, "expected a terminal like f3, got '" + std::string(tok) + "'");
            std::uint32_t j = 0;
            auto [ptr, ec] = std::from_chars(tok.data() + 1, tok.data() + tok.size(), j);
            if (ec != std::errc() || ptr != tok.data() + tok.size())
                fail(ParseErrorKind::Malformed, "bad terminal '" + std::string(tok) + "'");
            if (j >= m_)
                fail(ParseErrorKind::FeatureOutOfRange,
                     "terminal f" + std::to_string(j) + " out of range for " + std::to_string(m_) + " features");
            nodes.push_back(Primitive::terminal(j));
            return;
        }
        ++pos_;
        const auto name = atom();
        const auto op = op_from_name(name);
        if (!op) fail(ParseErrorKind::UnknownPrimitive, "unknown primitive '" + std::string(name) + "'");
        nodes.push_back(Primitive::function(*op));
        std::size_t children = 0;
        for (;;) {
            skip_space();
            if (pos_ >= text_.size()) fail(ParseErrorKind::Malformed, "missing ')'");
            if (text_[pos_] == ')') {
                ++pos_;
                break;
            }
            read_node(nodes);
            ++children;
        }
        if (children != arity(*op))
            fail(ParseErrorKind::ArityMismatch, std::string(name) + " expects " + std::to_string(arity(*op)) +
                                                    " arguments, got " + std::to_string(children));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t m_;
    std::size_t line_;
};

}  // namespace detail

inline std::string serialize_tree(const Tree& t) {
    std::ostringstream out;
    std::size_t pos = 0;
    detail::write_tree(out, t.nodes(), pos);
    return out.str();
}

inline std::string serialize_individual(const Individual& ind) {
    std::string out;
    for (const auto& t : ind.trees()) {
        out += serialize_tree(t);
        out += '\n';
    }
    return out;
}

inline Tree parse_tree(std::string_view text, std::size_t num_features, std::size_t line = 1) {
    return detail::TreeReader(text, num_features, line).read();
}

/// Inverse of serialize_individual. Blank lines and lines starting with '#' are skipped.
inline Individual parse_individual(std::string_view text, std::size_t num_features) {
    std::vector<Tree> trees;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        line = detail::trim(line);
        if (line.empty() || line.front() == '#') continue;
        trees.push_back(parse_tree(line, num_features, line_no));
    }
    if (trees.empty()) throw ParseError(ParseErrorKind::NoTrees, "no trees in serialized individual");
    return Individual(std::move(trees));
}

// ---------------------------------------------------------------------------
// Inspection

/// Terminal index -> number of leaves reading it, across all trees.
inline std::map<std::uint32_t, std::size_t> feature_usage(const Individual& ind) {
    std::map<std::uint32_t, std::size_t> out;
    for (const auto& t : ind.trees())
        for (const auto& p : t.nodes())
            if (p.is_terminal()) ++out[p.feature];
    return out;
}

/// Graphviz digraph of one tree. Terminals are labelled by feature name when given.
inline std::string tree_to_dot(const Tree& t, std::string_view graph_name,
                               const std::vector<std::string>& feature_names = {}) {
    std::ostringstream out;
    out << "digraph \"" << graph_name << "\" {\n  node [shape=box];\n";
    const auto nodes = t.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        std::string label;
        if (nodes[i].is_terminal()) {
            label = nodes[i].feature < feature_names.size() ? feature_names[nodes[i].feature]
                                                            : "f" + std::to_string(nodes[i].feature);
        } else {
            label = std::string(op_name(nodes[i].op));
        }
        out << "  n" << i << " [label=\"" << label << '"' << (nodes[i].is_terminal() ? ", shape=ellipse" : "")
            << "];\n";
    }
    std::vector<std::pair<std::size_t, std::size_t>> open;  // (node, children remaining)
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!open.empty()) {
            out << "  n" << open.back().first << " -> n" << i << ";\n";
            --open.back().second;
        }
        if (nodes[i].arity() > 0) open.emplace_back(i, nodes[i].arity());
        while (!open.empty() && open.back().second == 0) open.pop_back();
    }
    out << "}\n";
    return out.str();
}

}  // namespace gpmal
