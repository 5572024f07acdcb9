#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tabrobust/schema.hpp"

namespace tabrobust {

// Constraint language AST. Nodes live in a flat arena per constraint, in
// child-before-parent order, so value passes are a forward loop and adjoint
// passes a backward loop with no recursion or shared mutable state.

enum class ExprKind {
    Num, Feat,             // leaves
    Neg, Abs,              // unary arithmetic
    Add, Sub, Mul, Div,    // binary arithmetic
    Min, Max,              // n-ary arithmetic
    Cmp,                   // comparison (boolean leaf)
    And, Or, Implies       // boolean combinators
};

enum class CmpOp { Le, Ge, Lt, Gt, Eq };

struct ExprNode {
    ExprKind kind;
    double num = 0.0;              // Num
    std::int32_t feat = -1;        // Feat: schema index
    CmpOp op = CmpOp::Le;          // Cmp
    std::vector<std::int32_t> kids;
};

struct Expr {
    std::vector<ExprNode> nodes;
    std::int32_t root = -1;
    std::string text; // source, used in diagnostics and row-rejection messages

    const ExprNode& node(std::int32_t i) const { return nodes[static_cast<std::size_t>(i)]; }
};

/// The parsed constraint set Omega, with the definition sub-list
/// (constraints of shape `f == g(...)`) and their repair order.
struct ConstraintSet {
    std::vector<Expr> constraints;
    std::vector<std::int32_t> definitions;   // indices into `constraints`
    std::vector<std::int32_t> repair_order;  // topological order over `definitions`
    double tau = 1e-4;                       // strictness margin for <, >
};

struct ParsedSchema {
    FeatureSchema schema;
    ConstraintSet constraints;
    std::uint64_t hash = 0; // fingerprint of the canonical schema document

    std::size_t dim() const { return schema.dim(); }
};

using ParsedSchemaPtr = std::shared_ptr<const ParsedSchema>;

struct ParseError : std::runtime_error {
    int line;   // 1-based; 0 when not applicable
    int column; // 1-based
    ParseError(const std::string& msg, int line_, int column_);
};

/// Parse a schema document (JSON with `features`, `constraints`, `tau`).
ParsedSchema parse_schema(const std::string& json_text);
ParsedSchemaPtr load_schema_file(const std::string& path);

/// Parse one constraint string against an existing schema.
Expr parse_constraint(const std::string& text, const FeatureSchema& schema);

/// Exact boolean semantics: Cmp by real comparison, Implies(A,B) = !A or B.
/// Throws DataError on a division-guard violation at x.
bool eval_constraint(const Expr& e, std::span<const double> x_raw);

/// Value of an arithmetic subtree at x (definitions' right-hand sides).
double eval_arith(const Expr& e, std::int32_t node, std::span<const double> x_raw);

/// Canonical text form; parsing it back gives a structurally identical AST.
std::string to_text(const Expr& e, const FeatureSchema& schema);

bool structurally_equal(const Expr& a, const Expr& b);

/// For a definition constraint, the defined feature index (lhs of `f == ...`),
/// or -1 if the constraint is not definition-shaped.
std::int32_t definition_target(const Expr& e);

} // namespace tabrobust
