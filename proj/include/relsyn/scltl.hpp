#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace relsyn {

// Syntactically co-safe LTL formula. Nodes are hash-consed into a pool with
// constant folding, so structurally equal subformulas share one id; negation
// appears only on atoms by construction.
struct ScltlFormula {
    enum class Kind : uint8_t { tt, ff, atom, natom, conj, disj, until, next };
    struct Node {
        Kind kind;
        int atom = -1;          // for atom / natom
        std::vector<int> kids;  // sorted and deduplicated for conj / disj
    };

    std::vector<Node> nodes;
    std::vector<std::string> atoms;  // letter bit i corresponds to atoms[i]
    int root = -1;

    int atom_id(const std::string& name);
    int mk_true();
    int mk_false();
    int mk_atom(int atom);
    int mk_natom(int atom);
    int mk_conj(std::vector<int> kids);
    int mk_disj(std::vector<int> kids);
    int mk_until(int lhs, int rhs);
    int mk_next(int kid);

    std::string to_string(int node = -1) const;  // default: root

  private:
    std::map<std::tuple<int, int, std::vector<int>>, int> table_;
    int intern(Kind kind, int atom, std::vector<int> kids);
};

// Grammar: true | name | !name | f & f | f | f | f U f | X f, with parentheses.
// Precedence from loosest: |, &, U (right associative), unary. Throws
// std::invalid_argument with the offending position.
ScltlFormula parse_scltl(const std::string& text);

// Total DFA over the alphabet 2^atoms. Accepting states are absorbing
// (co-safe: a good prefix stays good), rejecting states are the dead sink.
struct Dfa {
    std::vector<std::string> atoms;
    int num_states = 0;
    int initial = 0;
    std::vector<std::vector<int>> next;  // [state][letter]
    std::vector<char> accepting;
    std::vector<char> rejecting;

    int num_letters() const { return 1 << static_cast<int>(atoms.size()); }
    int step(int q, uint32_t letter) const { return next[q][letter]; }
    bool accepts(const std::vector<uint32_t>& word) const;
    std::string dump() const;  // adjacency text, one line per (state, letter)
};

// Formula-derivative construction with memoized normal forms; refuses past
// 10^4 states.
Dfa to_dfa(const ScltlFormula& f);

}  // namespace relsyn
