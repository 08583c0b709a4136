#include "relsyn/scltl.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace relsyn {

int ScltlFormula::intern(Kind kind, int atom, std::vector<int> kids) {
    auto key = std::make_tuple(static_cast<int>(kind), atom, kids);
    auto it = table_.find(key);
    if (it != table_.end()) return it->second;
    int id = static_cast<int>(nodes.size());
    nodes.push_back({kind, atom, std::move(kids)});
    table_.emplace(std::move(key), id);
    return id;
}

int ScltlFormula::atom_id(const std::string& name) {
    for (size_t i = 0; i < atoms.size(); ++i)
        if (atoms[i] == name) return static_cast<int>(i);
    atoms.push_back(name);
    return static_cast<int>(atoms.size()) - 1;
}

int ScltlFormula::mk_true() { return intern(Kind::tt, -1, {}); }
int ScltlFormula::mk_false() { return intern(Kind::ff, -1, {}); }
int ScltlFormula::mk_atom(int atom) { return intern(Kind::atom, atom, {}); }
int ScltlFormula::mk_natom(int atom) { return intern(Kind::natom, atom, {}); }

int ScltlFormula::mk_conj(std::vector<int> kids) {
    std::vector<int> flat;
    for (int k : kids) {
        if (nodes[k].kind == Kind::ff) return mk_false();
        if (nodes[k].kind == Kind::tt) continue;
        if (nodes[k].kind == Kind::conj)
            flat.insert(flat.end(), nodes[k].kids.begin(), nodes[k].kids.end());
        else
            flat.push_back(k);
    }
    std::sort(flat.begin(), flat.end());
    flat.erase(std::unique(flat.begin(), flat.end()), flat.end());
    if (flat.empty()) return mk_true();
    if (flat.size() == 1) return flat[0];
    return intern(Kind::conj, -1, std::move(flat));
}

int ScltlFormula::mk_disj(std::vector<int> kids) {
    std::vector<int> flat;
    for (int k : kids) {
        if (nodes[k].kind == Kind::tt) return mk_true();
        if (nodes[k].kind == Kind::ff) continue;
        if (nodes[k].kind == Kind::disj)
            flat.insert(flat.end(), nodes[k].kids.begin(), nodes[k].kids.end());
        else
            flat.push_back(k);
    }
    std::sort(flat.begin(), flat.end());
    flat.erase(std::unique(flat.begin(), flat.end()), flat.end());
    if (flat.empty()) return mk_false();
    if (flat.size() == 1) return flat[0];
    return intern(Kind::disj, -1, std::move(flat));
}

int ScltlFormula::mk_until(int lhs, int rhs) { return intern(Kind::until, -1, {lhs, rhs}); }
int ScltlFormula::mk_next(int kid) { return intern(Kind::next, -1, {kid}); }

std::string ScltlFormula::to_string(int node) const {
    if (node < 0) node = root;
    const Node& n = nodes[node];
    auto join = [&](const char* op) {
        std::string s = "(";
        for (size_t i = 0; i < n.kids.size(); ++i) {
            if (i) s += op;
            s += to_string(n.kids[i]);
        }
        return s + ")";
    };
    switch (n.kind) {
        case Kind::tt: return "true";
        case Kind::ff: return "false";
        case Kind::atom: return atoms[n.atom];
        case Kind::natom: return "!" + atoms[n.atom];
        case Kind::conj: return join(" & ");
        case Kind::disj: return join(" | ");
        case Kind::until: return "(" + to_string(n.kids[0]) + " U " + to_string(n.kids[1]) + ")";
        case Kind::next: return "X " + to_string(n.kids[0]);
    }
    return "?";
}

namespace {

struct Token {
    enum class Kind { lparen, rparen, and_, or_, not_, until, next, truth, ident, end };
    Kind kind;
    std::string text;
    size_t pos;
};

std::vector<Token> tokenize(const std::string& text) {
    std::vector<Token> out;
    size_t i = 0;
    auto is_ident = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
    };
    while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '(') out.push_back({Token::Kind::lparen, "(", i++});
        else if (c == ')') out.push_back({Token::Kind::rparen, ")", i++});
        else if (c == '&') out.push_back({Token::Kind::and_, "&", i++});
        else if (c == '|') out.push_back({Token::Kind::or_, "|", i++});
        else if (c == '!') out.push_back({Token::Kind::not_, "!", i++});
        else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = i;
            while (i < text.size() && is_ident(text[i])) ++i;
            std::string word = text.substr(start, i - start);
            if (word == "U") out.push_back({Token::Kind::until, word, start});
            else if (word == "X") out.push_back({Token::Kind::next, word, start});
            else if (word == "true") out.push_back({Token::Kind::truth, word, start});
            else out.push_back({Token::Kind::ident, word, start});
        } else {
            throw std::invalid_argument("unexpected character '" + std::string(1, c) +
                                        "' at position " + std::to_string(i));
        }
    }
    out.push_back({Token::Kind::end, "", text.size()});
    return out;
}

class Parser {
  public:
    explicit Parser(const std::string& text) : tokens_(tokenize(text)) {}

    ScltlFormula run() {
        ScltlFormula f;
        f.root = parse_or(f);
        expect(Token::Kind::end, "end of input");
        return f;
    }

  private:
    std::vector<Token> tokens_;
    size_t at_ = 0;

    const Token& peek() const { return tokens_[at_]; }
    Token take() { return tokens_[at_++]; }
    [[noreturn]] void fail(const std::string& what) {
        throw std::invalid_argument("expected " + what + " at position " +
                                    std::to_string(peek().pos));
    }
    void expect(Token::Kind k, const std::string& what) {
        if (peek().kind != k) fail(what);
        ++at_;
    }

    int parse_or(ScltlFormula& f) {
        std::vector<int> kids{parse_and(f)};
        while (peek().kind == Token::Kind::or_) {
            take();
            kids.push_back(parse_and(f));
        }
        return kids.size() == 1 ? kids[0] : f.mk_disj(std::move(kids));
    }

    int parse_and(ScltlFormula& f) {
        std::vector<int> kids{parse_until(f)};
        while (peek().kind == Token::Kind::and_) {
            take();
            kids.push_back(parse_until(f));
        }
        return kids.size() == 1 ? kids[0] : f.mk_conj(std::move(kids));
    }

    int parse_until(ScltlFormula& f) {
        int lhs = parse_unary(f);
        if (peek().kind != Token::Kind::until) return lhs;
        take();
        return f.mk_until(lhs, parse_until(f));  // right associative
    }

    int parse_unary(ScltlFormula& f) {
        if (peek().kind == Token::Kind::not_) {
            size_t pos = take().pos;
            int kid = parse_primary(f);
            if (f.nodes[kid].kind != ScltlFormula::Kind::atom)
                throw std::invalid_argument("negation applies only to atoms (position " +
                                            std::to_string(pos) + ")");
            return f.mk_natom(f.nodes[kid].atom);
        }
        if (peek().kind == Token::Kind::next) {
            take();
            return f.mk_next(parse_unary(f));
        }
        return parse_primary(f);
    }

    int parse_primary(ScltlFormula& f) {
        switch (peek().kind) {
            case Token::Kind::truth: take(); return f.mk_true();
            case Token::Kind::ident: return f.mk_atom(f.atom_id(take().text));
            case Token::Kind::lparen: {
                take();
                int inner = parse_or(f);
                expect(Token::Kind::rparen, "')'");
                return inner;
            }
            default: fail("an atom, 'true', or '('");
        }
    }
};

// One-letter derivative: the residual obligation after reading `letter`.
int derivative(ScltlFormula& f, int node, uint32_t letter,
               std::map<std::pair<int, uint32_t>, int>& memo) {
    auto key = std::make_pair(node, letter);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    using Kind = ScltlFormula::Kind;
    // Copy the node: builders may reallocate f.nodes.
    ScltlFormula::Node n = f.nodes[node];
    int out;
    switch (n.kind) {
        case Kind::tt: out = f.mk_true(); break;
        case Kind::ff: out = f.mk_false(); break;
        case Kind::atom: out = (letter >> n.atom & 1) ? f.mk_true() : f.mk_false(); break;
        case Kind::natom: out = (letter >> n.atom & 1) ? f.mk_false() : f.mk_true(); break;
        case Kind::conj: {
            std::vector<int> kids;
            for (int k : n.kids) kids.push_back(derivative(f, k, letter, memo));
            out = f.mk_conj(std::move(kids));
            break;
        }
        case Kind::disj: {
            std::vector<int> kids;
            for (int k : n.kids) kids.push_back(derivative(f, k, letter, memo));
            out = f.mk_disj(std::move(kids));
            break;
        }
        case Kind::next: out = n.kids[0]; break;
        case Kind::until: {
            // d(a U b) = d(b) | (d(a) & (a U b))
            int da = derivative(f, n.kids[0], letter, memo);
            int db = derivative(f, n.kids[1], letter, memo);
            out = f.mk_disj({db, f.mk_conj({da, node})});
            break;
        }
        default: throw std::logic_error("unreachable formula kind");
    }
    memo.emplace(key, out);
    return out;
}

}  // namespace

ScltlFormula parse_scltl(const std::string& text) { return Parser(text).run(); }

bool Dfa::accepts(const std::vector<uint32_t>& word) const {
    int q = initial;
    for (uint32_t letter : word) q = next[q][letter];
    return accepting[q] != 0;
}

std::string Dfa::dump() const {
    std::ostringstream out;
    out << "states " << num_states << " letters " << num_letters() << " initial " << initial
        << "\n";
    for (int q = 0; q < num_states; ++q) {
        out << q << (accepting[q] ? " accept" : rejecting[q] ? " reject" : " pending");
        for (int a = 0; a < num_letters(); ++a) out << " " << next[q][a];
        out << "\n";
    }
    return out.str();
}

Dfa to_dfa(const ScltlFormula& formula) {
    if (formula.root < 0) throw std::invalid_argument("empty formula");
    if (formula.atoms.size() > 16)
        throw std::invalid_argument("alphabet too large: more than 16 atoms");
    ScltlFormula f = formula;  // working pool; construction adds residuals
    const int letters = 1 << static_cast<int>(f.atoms.size());

    Dfa dfa;
    dfa.atoms = f.atoms;
    std::unordered_map<int, int> state_of;
    std::vector<int> formula_of;
    auto state_for = [&](int node) {
        auto it = state_of.find(node);
        if (it != state_of.end()) return it->second;
        int q = static_cast<int>(formula_of.size());
        if (q >= 10000) throw std::invalid_argument("automaton construction exceeded 10000 states");
        state_of.emplace(node, q);
        formula_of.push_back(node);
        return q;
    };

    std::map<std::pair<int, uint32_t>, int> memo;
    dfa.initial = state_for(f.root);
    for (int q = 0; q < static_cast<int>(formula_of.size()); ++q) {
        dfa.next.emplace_back(letters);
        for (uint32_t a = 0; a < static_cast<uint32_t>(letters); ++a)
            dfa.next[q][a] = state_for(derivative(f, formula_of[q], a, memo));
    }
    dfa.num_states = static_cast<int>(formula_of.size());
    dfa.accepting.resize(dfa.num_states);
    dfa.rejecting.resize(dfa.num_states);
    for (int q = 0; q < dfa.num_states; ++q) {
        dfa.accepting[q] = f.nodes[formula_of[q]].kind == ScltlFormula::Kind::tt;
        dfa.rejecting[q] = f.nodes[formula_of[q]].kind == ScltlFormula::Kind::ff;
    }
    return dfa;
}

}  // namespace relsyn
