#pragma once

// Sparse multivariate polynomials over double coefficients.
//
// Monomials are exponent vectors of a fixed ambient dimension n and are
// ordered graded-lexicographically (total degree first, then x1 before x2
// within a degree class).  That order is fixed for the whole library so
// Gram-matrix indexing is reproducible across runs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace attractor {

/// Coefficients below this magnitude are dropped after arithmetic;
/// SDP solver tolerances dominate anyway.
inline constexpr double kCoeffDropTol = 1e-14;

struct Monomial {
    std::vector<int> exps;

    Monomial() = default;
    explicit Monomial(std::vector<int> e) : exps(std::move(e)) {
        for (int k : exps)
            if (k < 0) throw std::invalid_argument("Monomial: negative exponent");
    }
    static Monomial constant(int n) { return Monomial(std::vector<int>(n, 0)); }

    int dimension() const { return static_cast<int>(exps.size()); }
    int degree() const { return std::accumulate(exps.begin(), exps.end(), 0); }

    Monomial times(const Monomial& o) const {
        if (exps.size() != o.exps.size())
            throw std::invalid_argument("Monomial::times: dimension mismatch");
        Monomial r = *this;
        for (size_t k = 0; k < exps.size(); ++k) r.exps[k] += o.exps[k];
        return r;
    }

    bool operator==(const Monomial& o) const { return exps == o.exps; }
};

/// Graded-lex order: lower total degree first; within a degree class the
/// lexicographically larger exponent vector comes first, so x1 < x2.
struct GrlexLess {
    bool operator()(const Monomial& a, const Monomial& b) const {
        const int da = a.degree(), db = b.degree();
        if (da != db) return da < db;
        return a.exps > b.exps;
    }
};

class Polynomial {
  public:
    using TermMap = std::map<Monomial, double, GrlexLess>;

    explicit Polynomial(int dimension) : dim_(dimension) {
        if (dimension < 1) throw std::invalid_argument("Polynomial: dimension must be >= 1");
    }

    static Polynomial constant(int n, double c) {
        Polynomial p(n);
        p.add_term(Monomial::constant(n), c);
        return p;
    }

    /// The monomial x_{i+1} (zero-based index i).
    static Polynomial variable(int n, int i) {
        if (i < 0 || i >= n) throw std::invalid_argument("Polynomial::variable: index out of range");
        std::vector<int> e(n, 0);
        e[i] = 1;
        Polynomial p(n);
        p.add_term(Monomial(std::move(e)), 1.0);
        return p;
    }

    int dimension() const { return dim_; }
    const TermMap& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    int degree() const {
        int d = 0;
        for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
        return d;
    }

    double coefficient(const Monomial& m) const {
        auto it = terms_.find(m);
        return it == terms_.end() ? 0.0 : it->second;
    }

    double constant_term() const { return coefficient(Monomial::constant(dim_)); }

    Polynomial& add_term(const Monomial& m, double c) {
        if (m.dimension() != dim_)
            throw std::invalid_argument("Polynomial::add_term: monomial dimension mismatch");
        auto [it, inserted] = terms_.try_emplace(m, 0.0);
        it->second += c;
        if (std::abs(it->second) < kCoeffDropTol) terms_.erase(it);
        return *this;
    }

    Polynomial operator+(const Polynomial& q) const {
        check_same_dim(q);
        Polynomial r = *this;
        for (const auto& [m, c] : q.terms_) r.add_term(m, c);
        return r;
    }

    Polynomial operator-(const Polynomial& q) const {
        check_same_dim(q);
        Polynomial r = *this;
        for (const auto& [m, c] : q.terms_) r.add_term(m, -c);
        return r;
    }

    Polynomial operator-() const {
        Polynomial r(dim_);
        for (const auto& [m, c] : terms_) r.terms_.emplace(m, -c);
        return r;
    }

    Polynomial operator*(const Polynomial& q) const {
        check_same_dim(q);
        Polynomial r(dim_);
        for (const auto& [ma, ca] : terms_)
            for (const auto& [mb, cb] : q.terms_) r.add_term(ma.times(mb), ca * cb);
        return r;
    }

    Polynomial operator*(double s) const {
        Polynomial r(dim_);
        for (const auto& [m, c] : terms_) {
            const double v = c * s;
            if (std::abs(v) >= kCoeffDropTol) r.terms_.emplace(m, v);
        }
        return r;
    }

    friend Polynomial operator*(double s, const Polynomial& p) { return p * s; }

    Polynomial pow(int k) const {
        if (k < 0) throw std::invalid_argument("Polynomial::pow: negative exponent");
        Polynomial r = Polynomial::constant(dim_, 1.0);
        for (int i = 0; i < k; ++i) r = r * (*this);
        return r;
    }

    double evaluate(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != dim_)
            throw std::invalid_argument("Polynomial::evaluate: point dimension mismatch");
        double acc = 0.0;
        for (const auto& [m, c] : terms_) {
            double t = c;
            for (int k = 0; k < dim_; ++k) {
                double b = x[k];
                int e = m.exps[k];
                while (e > 0) {
                    if (e & 1) t *= b;
                    b *= b;
                    e >>= 1;
                }
            }
            acc += t;
        }
        return acc;
    }

    double evaluate(const std::vector<double>& x) const {
        return evaluate(std::span<const double>(x));
    }

    Polynomial partial(int axis) const {
        if (axis < 0 || axis >= dim_) throw std::invalid_argument("Polynomial::partial: bad axis");
        Polynomial r(dim_);
        for (const auto& [m, c] : terms_) {
            if (m.exps[axis] == 0) continue;
            Monomial d = m;
            const int e = d.exps[axis]--;
            r.add_term(d, c * e);
        }
        return r;
    }

    bool operator==(const Polynomial& q) const { return dim_ == q.dim_ && terms_ == q.terms_; }

  private:
    void check_same_dim(const Polynomial& q) const {
        if (dim_ != q.dim_) throw std::invalid_argument("Polynomial: dimension mismatch");
    }

    int dim_;
    TermMap terms_;
};

inline std::vector<Polynomial> gradient(const Polynomial& p) {
    std::vector<Polynomial> g;
    g.reserve(p.dimension());
    for (int k = 0; k < p.dimension(); ++k) g.push_back(p.partial(k));
    return g;
}

/// Directional derivative of V along the vector field f:  sum_i dV/dx_i * f_i.
inline Polynomial lie_derivative(const Polynomial& V, const std::vector<Polynomial>& f) {
    if (static_cast<int>(f.size()) != V.dimension())
        throw std::invalid_argument("lie_derivative: field length != dimension");
    Polynomial r(V.dimension());
    for (int k = 0; k < V.dimension(); ++k) {
        if (f[k].dimension() != V.dimension())
            throw std::invalid_argument("lie_derivative: component dimension mismatch");
        r = r + V.partial(k) * f[k];
    }
    return r;
}

inline std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / i;
    return r;
}

/// All monomials of total degree <= d in n variables, graded-lex order.
/// Length is C(n+d, d).
inline std::vector<Monomial> monomial_basis(int n, int d) {
    if (n < 1 || d < 0) throw std::invalid_argument("monomial_basis: need n >= 1, d >= 0");
    std::vector<Monomial> out;
    out.reserve(binomial(n + d, d));
    std::vector<int> e(n, 0);
    // odometer over exponent vectors with total degree <= d
    while (true) {
        out.emplace_back(e);
        int k = n - 1;
        while (k >= 0) {
            ++e[k];
            if (std::accumulate(e.begin(), e.end(), 0) <= d) break;
            e[k] = 0;
            --k;
        }
        if (k < 0) break;
    }
    std::sort(out.begin(), out.end(), GrlexLess{});
    return out;
}

/// Coordinates of p in the given basis; every term of p must appear in it.
inline std::vector<double> coefficient_vector(const Polynomial& p,
                                              const std::vector<Monomial>& basis) {
    std::map<Monomial, size_t, GrlexLess> index;
    for (size_t i = 0; i < basis.size(); ++i) index.emplace(basis[i], i);
    std::vector<double> c(basis.size(), 0.0);
    for (const auto& [m, v] : p.terms()) {
        auto it = index.find(m);
        if (it == index.end())
            throw std::invalid_argument("coefficient_vector: term outside basis");
        c[it->second] = v;
    }
    return c;
}

inline Polynomial from_coefficient_vector(std::span<const double> c,
                                          const std::vector<Monomial>& basis, int n) {
    if (c.size() != basis.size())
        throw std::invalid_argument("from_coefficient_vector: size mismatch");
    Polynomial p(n);
    for (size_t i = 0; i < basis.size(); ++i)
        if (c[i] != 0.0) p.add_term(basis[i], c[i]);
    return p;
}

/// Per-point table of variable powers; speeds up evaluating many polynomials
/// (or their gradients) at the same sample point.
struct PowerTable {
    int n = 0;
    int max_degree = 0;
    std::vector<double> pw;  // pw[var * (max_degree+1) + e] = x_var^e

    PowerTable(int n_, int max_deg) : n(n_), max_degree(max_deg), pw(n_ * (max_deg + 1), 1.0) {}

    void set_point(std::span<const double> x) {
        const int stride = max_degree + 1;
        for (int v = 0; v < n; ++v) {
            double* row = pw.data() + v * stride;
            row[0] = 1.0;
            for (int e = 1; e <= max_degree; ++e) row[e] = row[e - 1] * x[v];
        }
    }

    double eval(const Polynomial& p) const {
        const int stride = max_degree + 1;
        double acc = 0.0;
        for (const auto& [m, c] : p.terms()) {
            double t = c;
            for (int v = 0; v < n; ++v) t *= pw[v * stride + m.exps[v]];
            acc += t;
        }
        return acc;
    }
};

// ---------------------------------------------------------------------------
// Textual syntax: "2.5*x1^2*x3 - x2", variables x1..xn, with parentheses and
// products of grouped factors allowed.
// ---------------------------------------------------------------------------

namespace detail {

class PolyParser {
  public:
    PolyParser(std::string_view s, int n) : s_(s), n_(n) {}

    Polynomial parse() {
        Polynomial p = parse_expr();
        skip_ws();
        if (pos_ != s_.size()) fail("trailing input");
        return p;
    }

  private:
    Polynomial parse_expr() {
        Polynomial acc(n_);
        bool neg = false;
        skip_ws();
        if (peek() == '+' || peek() == '-') neg = get() == '-';
        acc = acc + (neg ? -parse_term() : parse_term());
        while (true) {
            skip_ws();
            char c = peek();
            if (c != '+' && c != '-') break;
            get();
            Polynomial t = parse_term();
            acc = (c == '-') ? acc - t : acc + t;
        }
        return acc;
    }

    Polynomial parse_term() {
        Polynomial acc = parse_factor();
        while (true) {
            skip_ws();
            if (peek() != '*') break;
            get();
            acc = acc * parse_factor();
        }
        return acc;
    }

    Polynomial parse_factor() {
        Polynomial base = parse_base();
        skip_ws();
        if (peek() == '^') {
            get();
            skip_ws();
            size_t start = pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            if (start == pos_) fail("expected integer exponent after '^'");
            int e = std::stoi(std::string(s_.substr(start, pos_ - start)));
            return base.pow(e);
        }
        return base;
    }

    Polynomial parse_base() {
        skip_ws();
        char c = peek();
        if (c == '(') {
            get();
            Polynomial p = parse_expr();
            skip_ws();
            if (get() != ')') fail("expected ')'");
            return p;
        }
        if (c == 'x') {
            get();
            size_t start = pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            if (start == pos_) fail("expected variable index after 'x'");
            int idx = std::stoi(std::string(s_.substr(start, pos_ - start)));
            if (idx < 1 || idx > n_) fail("variable index out of range");
            return Polynomial::variable(n_, idx - 1);
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            size_t consumed = 0;
            double v = std::stod(std::string(s_.substr(pos_)), &consumed);
            pos_ += consumed;
            return Polynomial::constant(n_, v);
        }
        fail("unexpected character");
        return Polynomial(n_);  // unreachable
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
    char get() { return pos_ < s_.size() ? s_[pos_++] : '\0'; }
    [[noreturn]] void fail(const std::string& why) const {
        throw std::invalid_argument("polynomial parse error at position " + std::to_string(pos_) +
                                    ": " + why);
    }

    std::string_view s_;
    int n_;
    size_t pos_ = 0;
};

}  // namespace detail

inline Polynomial parse_polynomial(std::string_view text, int n) {
    return detail::PolyParser(text, n).parse();
}

inline std::string to_string(const Polynomial& p) {
    if (p.is_zero()) return "0";
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& [m, c] : p.terms()) {
        double v = c;
        if (first) {
            if (v < 0) {
                os << "-";
                v = -v;
            }
        } else {
            os << (v < 0 ? " - " : " + ");
            v = std::abs(v);
        }
        first = false;
        const bool has_vars = m.degree() > 0;
        if (!has_vars || v != 1.0) {
            os << v;
            if (has_vars) os << "*";
        }
        bool first_var = true;
        for (int k = 0; k < m.dimension(); ++k) {
            if (m.exps[k] == 0) continue;
            if (!first_var) os << "*";
            first_var = false;
            os << "x" << (k + 1);
            if (m.exps[k] > 1) os << "^" << m.exps[k];
        }
    }
    return os.str();
}

}  // namespace attractor
