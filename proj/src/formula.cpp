#include "gammkit/formula.hpp"

#include <cctype>
#include <charconv>
#include <set>

#include <fmt/format.h>

#include "gammkit/error.hpp"

namespace gammkit {

namespace {

std::string describe_parse_error(std::size_t offset, const std::vector<std::string>& expected,
                                 const std::string& found) {
    std::string list;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (i > 0) list += ", ";
        list += expected[i];
    }
    return fmt::format("syntax error at byte {}: expected one of {{{}}}, found {}", offset, list,
                       found);
}

}  // namespace

ParseError::ParseError(std::size_t offset, std::vector<std::string> expected,
                       const std::string& found)
    : DataError(describe_parse_error(offset, expected, found)),
      offset_(offset),
      expected_(std::move(expected)) {}

}  // namespace gammkit

namespace gammkit::formula {

std::string_view to_string(SmoothKind kind) {
    switch (kind) {
        case SmoothKind::tprs: return "tprs";
        case SmoothKind::tensor: return "tensor";
        case SmoothKind::factor_smooth: return "factor_smooth";
        case SmoothKind::random_effect: return "random_effect";
    }
    return "unknown";
}

std::vector<std::string> ModelSpec::term_labels() const {
    std::vector<std::string> out = parametric_terms;
    for (const auto& t : smooth_terms) out.push_back(t.label);
    return out;
}

namespace {

enum class Tok { ident, number, string, tilde, plus, lparen, rparen, comma, equals, end };

struct Token {
    Tok kind;
    std::string text;
    std::size_t offset;
};

std::string describe(const Token& t) {
    switch (t.kind) {
        case Tok::end: return "end of input";
        case Tok::string: return fmt::format("\"{}\"", t.text);
        default: return fmt::format("'{}'", t.text);
    }
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        if (ident_start(c)) {
            while (i < text.size() && ident_char(text[i])) ++i;
            out.push_back({Tok::ident, std::string(text.substr(start, i - start)), start});
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
            out.push_back({Tok::number, std::string(text.substr(start, i - start)), start});
        } else if (c == '"') {
            ++i;
            while (i < text.size() && text[i] != '"') ++i;
            if (i == text.size()) throw ParseError(start, {"closing '\"'"}, "end of input");
            out.push_back({Tok::string, std::string(text.substr(start + 1, i - start - 1)), start});
            ++i;
        } else {
            Tok kind{};
            switch (c) {
                case '~': kind = Tok::tilde; break;
                case '+': kind = Tok::plus; break;
                case '(': kind = Tok::lparen; break;
                case ')': kind = Tok::rparen; break;
                case ',': kind = Tok::comma; break;
                case '=': kind = Tok::equals; break;
                default:
                    throw ParseError(start, {"identifier", "number", "string", "'~'", "'+'", "'('",
                                             "')'", "','", "'='"},
                                     fmt::format("'{}'", c));
            }
            out.push_back({kind, std::string(1, c), start});
            ++i;
        }
    }
    out.push_back({Tok::end, "", text.size()});
    return out;
}

struct RawArg {
    std::optional<std::string> key;
    std::size_t offset = 0;
    // Positional args and by=/bs= values.
    std::string text;
    bool is_string = false;
    // k=/m= values; k may be c(a, b, ...).
    std::vector<int> ints;
};

class Parser {
public:
    explicit Parser(std::string_view text) : tokens_(tokenize(text)) {}

    ModelSpec parse() {
        ModelSpec spec;
        spec.response = expect(Tok::ident, "response name").text;
        expect(Tok::tilde, "'~'");
        parse_term(spec);
        while (peek().kind == Tok::plus) {
            advance();
            parse_term(spec);
        }
        if (peek().kind != Tok::end) fail({"'+'", "end of input"});
        check_invariants(spec);
        return spec;
    }

private:
    const Token& peek() const { return tokens_[pos_]; }
    const Token& advance() { return tokens_[pos_++]; }

    [[noreturn]] void fail(std::vector<std::string> expected) const {
        throw ParseError(peek().offset, std::move(expected), describe(peek()));
    }

    const Token& expect(Tok kind, const char* what) {
        if (peek().kind != kind) fail({what});
        return advance();
    }

    void parse_term(ModelSpec& spec) {
        const Token& t = peek();
        if (t.kind == Tok::number) {
            if (t.text != "1") fail({"term", "'1'"});
            advance();
            return;
        }
        if (t.kind != Tok::ident) fail({"term"});
        advance();
        if (peek().kind == Tok::lparen) {
            if (t.text != "s" && t.text != "te") {
                throw ParseError(t.offset, {"'s'", "'te'"}, describe(t));
            }
            spec.smooth_terms.push_back(parse_smooth(t));
        } else {
            spec.parametric_terms.push_back(t.text);
        }
    }

    std::vector<int> parse_int_list() {
        std::vector<int> out;
        const Token& head = peek();
        if (head.kind == Tok::number) {
            out.push_back(to_int(advance()));
            return out;
        }
        if (head.kind == Tok::ident && head.text == "c") {
            advance();
            expect(Tok::lparen, "'('");
            out.push_back(to_int(expect(Tok::number, "integer")));
            while (peek().kind == Tok::comma) {
                advance();
                out.push_back(to_int(expect(Tok::number, "integer")));
            }
            expect(Tok::rparen, "')'");
            return out;
        }
        fail({"integer", "c(...)"});
    }

    static int to_int(const Token& t) {
        int v = 0;
        auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec != std::errc{}) throw ParseError(t.offset, {"integer"}, describe(t));
        return v;
    }

    RawArg parse_arg() {
        RawArg arg;
        const Token& first = peek();
        arg.offset = first.offset;
        if (first.kind != Tok::ident) fail({"identifier"});
        advance();
        if (peek().kind != Tok::equals) {
            arg.text = first.text;
            return arg;
        }
        advance();
        arg.key = first.text;
        if (first.text == "k" || first.text == "m") {
            arg.ints = parse_int_list();
        } else if (first.text == "bs") {
            arg.text = expect(Tok::string, "string").text;
            arg.is_string = true;
        } else if (first.text == "by") {
            arg.text = expect(Tok::ident, "identifier").text;
        } else {
            throw ParseError(first.offset, {"'by'", "'bs'", "'k'", "'m'"}, describe(first));
        }
        return arg;
    }

    SmoothTerm parse_smooth(const Token& head) {
        expect(Tok::lparen, "'('");
        std::vector<RawArg> args;
        args.push_back(parse_arg());
        while (peek().kind == Tok::comma) {
            advance();
            args.push_back(parse_arg());
        }
        expect(Tok::rparen, "')'");
        return build_smooth(head, args);
    }

    static SmoothTerm build_smooth(const Token& head, const std::vector<RawArg>& args) {
        SmoothTerm term;
        std::optional<std::string> bs;
        std::optional<std::vector<int>> k;
        std::set<std::string> seen;
        bool keyword_seen = false;
        for (const auto& a : args) {
            if (!a.key) {
                if (keyword_seen) {
                    throw DataError(fmt::format(
                        "covariate '{}' at byte {} follows a keyword option", a.text, a.offset));
                }
                term.covariates.push_back(a.text);
                continue;
            }
            keyword_seen = true;
            if (!seen.insert(*a.key).second) {
                throw DataError(fmt::format("option '{}' given twice at byte {}", *a.key, a.offset));
            }
            if (*a.key == "bs") {
                if (a.text != "fs" && a.text != "re") {
                    throw DataError(fmt::format(
                        "unknown basis code bs=\"{}\" at byte {} (allowed: \"fs\", \"re\")", a.text,
                        a.offset));
                }
                bs = a.text;
            } else if (*a.key == "by") {
                term.by_var = a.text;
            } else if (*a.key == "k") {
                k = a.ints;
            } else if (*a.key == "m") {
                if (a.ints.size() != 1) {
                    throw DataError(fmt::format("m= takes a single integer (byte {})", a.offset));
                }
                term.shrinkage_order_m = a.ints.front();
            }
        }
        const std::size_t ncov = term.covariates.size();
        if (head.text == "te") {
            if (bs) throw DataError("te() does not accept bs=");
            term.kind = SmoothKind::tensor;
            if (ncov < 2) throw DataError("te() needs at least two covariates");
        } else if (!bs) {
            term.kind = SmoothKind::tprs;
            if (ncov != 1) {
                throw DataError(fmt::format(
                    "s() without bs= takes exactly one covariate, got {} (multi-dimensional thin "
                    "plate smooths are not supported; use te())",
                    ncov));
            }
        } else if (*bs == "fs") {
            term.kind = SmoothKind::factor_smooth;
            if (ncov != 2) throw DataError("s(..., bs=\"fs\") needs a numeric covariate and a factor");
        } else {
            term.kind = SmoothKind::random_effect;
            if (ncov < 1 || ncov > 2) throw DataError("s(..., bs=\"re\") takes one or two columns");
        }
        if (term.shrinkage_order_m && term.kind != SmoothKind::factor_smooth) {
            throw DataError("m= is only meaningful for factor smooths (bs=\"fs\")");
        }
        if (term.shrinkage_order_m && (*term.shrinkage_order_m < 1 || *term.shrinkage_order_m > 2)) {
            throw DataError("m= must be 1 or 2");
        }
        if (term.by_var &&
            (term.kind == SmoothKind::factor_smooth || term.kind == SmoothKind::random_effect)) {
            throw DataError("by= cannot be combined with bs=\"fs\" or bs=\"re\"");
        }
        if (term.kind == SmoothKind::random_effect) {
            if (k) throw DataError("k= has no meaning for random-effect smooths");
        } else {
            term.k_explicit = k.has_value();
            const std::size_t margins = term.kind == SmoothKind::tensor ? ncov : 1;
            if (!k) {
                const int def = term.kind == SmoothKind::tensor ? kDefaultTensorMarginalK
                              : term.kind == SmoothKind::tprs   ? kDefaultTprsK
                                                                : kDefaultFactorSmoothK;
                term.basis_dim_k.assign(margins, def);
            } else if (k->size() == 1) {
                term.basis_dim_k.assign(margins, k->front());
            } else if (k->size() == margins) {
                term.basis_dim_k = *k;
            } else {
                throw DataError(fmt::format("k= lists {} values for {} marginal(s)", k->size(), margins));
            }
            for (int v : term.basis_dim_k) {
                if (v < 3) throw DataError(fmt::format("k={} is below the minimum of 3", v));
            }
        }
        term.label = make_label(term);
        return term;
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += ',';
        out += parts[i];
    }
    return out;
}

}  // namespace

std::string make_label(const SmoothTerm& term) {
    const std::string cov = join(term.covariates);
    std::string by = term.by_var ? ",by=" + *term.by_var : "";
    switch (term.kind) {
        case SmoothKind::tprs: return fmt::format("s({}{})", cov, by);
        case SmoothKind::tensor: return fmt::format("te({}{})", cov, by);
        case SmoothKind::factor_smooth: return fmt::format("fs({})", cov);
        case SmoothKind::random_effect: return fmt::format("re({})", cov);
    }
    return cov;
}

ModelSpec parse_formula(std::string_view text) {
    bool blank = true;
    for (char c : text) blank = blank && std::isspace(static_cast<unsigned char>(c));
    if (blank) throw DataError("formula text is empty");
    return Parser(text).parse();
}

void check_invariants(const ModelSpec& spec) {
    std::set<std::string> labels;
    for (const auto& label : spec.term_labels()) {
        if (!labels.insert(label).second) throw DataError(fmt::format("duplicate term '{}'", label));
    }
    auto uses_response = [&](const std::string& name) { return name == spec.response; };
    for (const auto& p : spec.parametric_terms) {
        if (uses_response(p)) throw DataError(fmt::format("response '{}' used as a predictor", p));
    }
    for (const auto& s : spec.smooth_terms) {
        for (const auto& c : s.covariates) {
            if (uses_response(c)) throw DataError(fmt::format("response '{}' used as a predictor", c));
        }
        if (s.by_var && uses_response(*s.by_var)) {
            throw DataError(fmt::format("response '{}' used as a by variable", *s.by_var));
        }
    }
    if (!(spec.rho >= 0.0 && spec.rho < 1.0)) {
        throw DataError(fmt::format("rho={} outside [0, 1)", spec.rho));
    }
    if (spec.rho > 0.0 && !spec.ar_start_column) {
        throw DataError("rho > 0 requires an AR start column");
    }
}

void set_ar_options(ModelSpec& spec, double rho, std::optional<std::string> ar_start_column) {
    spec.rho = rho;
    spec.ar_start_column = std::move(ar_start_column);
    check_invariants(spec);
}

std::string pretty_print(const ModelSpec& spec) {
    std::vector<std::string> terms = spec.parametric_terms;
    for (const auto& s : spec.smooth_terms) {
        std::string body = join(s.covariates);
        if (s.by_var) body += ", by=" + *s.by_var;
        if (s.kind == SmoothKind::factor_smooth) body += ", bs=\"fs\"";
        if (s.kind == SmoothKind::random_effect) body += ", bs=\"re\"";
        if (s.k_explicit) {
            bool uniform = true;
            for (int v : s.basis_dim_k) uniform = uniform && v == s.basis_dim_k.front();
            if (uniform) {
                body += fmt::format(", k={}", s.basis_dim_k.front());
            } else {
                body += ", k=c(";
                for (std::size_t i = 0; i < s.basis_dim_k.size(); ++i) {
                    body += (i ? ", " : "") + std::to_string(s.basis_dim_k[i]);
                }
                body += ")";
            }
        }
        if (s.shrinkage_order_m) body += fmt::format(", m={}", *s.shrinkage_order_m);
        terms.push_back(fmt::format("{}({})", s.kind == SmoothKind::tensor ? "te" : "s", body));
    }
    if (terms.empty()) terms.emplace_back("1");
    std::string out = spec.response + " ~ ";
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i > 0) out += " + ";
        out += terms[i];
    }
    return out;
}

}  // namespace gammkit::formula
