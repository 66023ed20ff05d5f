#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "texrepair/source.hpp"

namespace texrepair {

enum class NodeKind {
    Root,
    Command,
    Environment,
    Group,
    MathInline,
    MathDisplay,
    Text,
    Comment,
    PackageDecl,
    DocumentClassDecl,
    CiteRef,
    LabelRef,
    Error,
};

/// Why a node was produced by error recovery. `None` for well-formed nodes.
enum class ErrorKind {
    None,
    UnclosedEnvironment,
    OrphanEnd,
    UnterminatedMath,
    DisplayMathMismatch,
    MathDelimiterMismatch,
    StrayMathClose,
    UnclosedGroup,
    UnmatchedBrace,
    UnterminatedVerb,
    MissingEnvironmentName,
};

std::string_view to_string(NodeKind kind);
std::string_view to_string(ErrorKind kind);

struct AstNode;

/// One slice of a node's source: literal bytes owned by the node, or a
/// reference into its `children` / `args`. Concatenating pieces in order
/// reproduces the node's source exactly.
struct Piece {
    enum class Type { Literal, Child, Arg };
    Type type = Type::Literal;
    std::string text;
    std::size_t index = 0;
};

struct AstNode {
    NodeKind kind = NodeKind::Text;
    /// Command name without backslash, environment name, package/class name,
    /// or first cite/ref key.
    std::string name;
    /// Control sequence that produced a decl/ref node (`usepackage`, `citep`, ...).
    std::string macro;
    /// All keys of a multi-key node (`\usepackage{a,b}`, `\cite{x,y}`).
    std::vector<std::string> keys;
    /// Raw text of the first optional argument, if any.
    std::optional<std::string> options;
    Span span;
    /// `\begin{name}` plus its arguments for environments; the control sequence
    /// plus arguments for commands. Equal to `span` elsewhere.
    Span head;
    /// `\end{name}` of a closed environment.
    std::optional<Span> tail;
    std::vector<AstNode> children;
    /// Argument groups in source order; `optional` marks `[...]` groups.
    std::vector<AstNode> args;
    std::vector<Piece> pieces;
    ErrorKind error = ErrorKind::None;
    bool optional = false;
    bool starred = false;
    /// Environment whose body is typeset in math mode.
    bool math_env = false;

    bool is_error() const { return kind == NodeKind::Error || error != ErrorKind::None; }
    bool is_math() const { return kind == NodeKind::MathInline || kind == NodeKind::MathDisplay || math_env; }

    /// Raw source of the first mandatory argument, when it is a plain group.
    std::optional<std::string> mandatory_arg_text(std::size_t nth = 0) const;

    /// Children and args interleaved in source order.
    std::vector<const AstNode*> subnodes() const;

    bool structurally_equal(const AstNode& other) const;
};

struct PackageUse {
    std::string name;
    std::string options;
    Span span;
};

struct MacroDef {
    std::string name;
    int arity = 0;
    Span span;
};

struct EnvironmentDef {
    std::string name;
    Span span;
};

/// Lossless syntax tree of one document.
struct Ast {
    AstNode root;
    std::vector<PackageUse> packages;
    std::vector<MacroDef> macros;
    std::vector<EnvironmentDef> environments;
    std::size_t recovery_count = 0;
    /// Offset of `\begin{document}`, if present.
    std::optional<std::size_t> document_begin;

    /// Top-level nodes before `\begin{document}` (all of them if absent).
    std::vector<const AstNode*> preamble() const;
    const AstNode* document_environment() const;
    bool defines_macro(std::string_view name) const;
    bool defines_environment(std::string_view name) const;
    bool loads(std::string_view package) const;
};

/// Root-to-node chain.
using NodePath = std::vector<const AstNode*>;

std::string render(const Ast& ast);
std::string render(const AstNode& node);

/// Deepest nodes whose span intersects `line`, innermost first.
std::vector<NodePath> locate(const Ast& ast, const SourceDocument& doc, std::size_t line);

/// Pre-order walk over children and args; return false from `fn` to skip a subtree.
void walk(const AstNode& node, const std::function<bool(const AstNode&, const NodePath&)>& fn);

std::size_t count_errors(const AstNode& node);

}  // namespace texrepair
