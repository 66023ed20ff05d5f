#include "texrepair/ast.hpp"

#include <algorithm>

namespace texrepair {

std::string_view to_string(NodeKind kind)
{
    switch (kind) {
    case NodeKind::Root: return "Root";
    case NodeKind::Command: return "Command";
    case NodeKind::Environment: return "Environment";
    case NodeKind::Group: return "Group";
    case NodeKind::MathInline: return "MathInline";
    case NodeKind::MathDisplay: return "MathDisplay";
    case NodeKind::Text: return "Text";
    case NodeKind::Comment: return "Comment";
    case NodeKind::PackageDecl: return "PackageDecl";
    case NodeKind::DocumentClassDecl: return "DocumentClassDecl";
    case NodeKind::CiteRef: return "CiteRef";
    case NodeKind::LabelRef: return "LabelRef";
    case NodeKind::Error: return "Error";
    }
    return "?";
}

std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::None: return "None";
    case ErrorKind::UnclosedEnvironment: return "UnclosedEnvironment";
    case ErrorKind::OrphanEnd: return "OrphanEnd";
    case ErrorKind::UnterminatedMath: return "UnterminatedMath";
    case ErrorKind::DisplayMathMismatch: return "DisplayMathMismatch";
    case ErrorKind::MathDelimiterMismatch: return "MathDelimiterMismatch";
    case ErrorKind::StrayMathClose: return "StrayMathClose";
    case ErrorKind::UnclosedGroup: return "UnclosedGroup";
    case ErrorKind::UnmatchedBrace: return "UnmatchedBrace";
    case ErrorKind::UnterminatedVerb: return "UnterminatedVerb";
    case ErrorKind::MissingEnvironmentName: return "MissingEnvironmentName";
    }
    return "?";
}

std::optional<std::string> AstNode::mandatory_arg_text(std::size_t nth) const
{
    for (const auto& a : args) {
        if (a.kind != NodeKind::Group || a.optional) continue;
        if (nth-- > 0) continue;
        std::string r = render(a);
        if (r.empty()) return std::string{};
        r.erase(0, 1);
        if (a.error == ErrorKind::None && !r.empty()) r.pop_back();
        return r;
    }
    return std::nullopt;
}

std::vector<const AstNode*> AstNode::subnodes() const
{
    std::vector<const AstNode*> out;
    out.reserve(children.size() + args.size());
    for (const auto& p : pieces) {
        if (p.type == Piece::Type::Child) out.push_back(&children[p.index]);
        else if (p.type == Piece::Type::Arg) out.push_back(&args[p.index]);
    }
    return out;
}

bool AstNode::structurally_equal(const AstNode& other) const
{
    if (kind != other.kind || name != other.name || keys != other.keys || error != other.error ||
        optional != other.optional || starred != other.starred || children.size() != other.children.size() ||
        args.size() != other.args.size() || pieces.size() != other.pieces.size())
        return false;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        if (pieces[i].type != other.pieces[i].type || pieces[i].text != other.pieces[i].text ||
            pieces[i].index != other.pieces[i].index)
            return false;
    }
    for (std::size_t i = 0; i < children.size(); ++i)
        if (!children[i].structurally_equal(other.children[i])) return false;
    for (std::size_t i = 0; i < args.size(); ++i)
        if (!args[i].structurally_equal(other.args[i])) return false;
    return true;
}

std::vector<const AstNode*> Ast::preamble() const
{
    std::vector<const AstNode*> out;
    for (const auto& child : root.children) {
        if (child.kind == NodeKind::Environment && child.name == "document") break;
        out.push_back(&child);
    }
    return out;
}

const AstNode* Ast::document_environment() const
{
    for (const auto& child : root.children)
        if (child.kind == NodeKind::Environment && child.name == "document") return &child;
    return nullptr;
}

bool Ast::defines_macro(std::string_view name) const
{
    return std::any_of(macros.begin(), macros.end(), [&](const MacroDef& m) { return m.name == name; });
}

bool Ast::defines_environment(std::string_view name) const
{
    return std::any_of(environments.begin(), environments.end(),
                       [&](const EnvironmentDef& e) { return e.name == name; });
}

bool Ast::loads(std::string_view package) const
{
    return std::any_of(packages.begin(), packages.end(), [&](const PackageUse& p) { return p.name == package; });
}

namespace {

void render_into(const AstNode& node, std::string& out)
{
    for (const auto& p : node.pieces) {
        switch (p.type) {
        case Piece::Type::Literal: out += p.text; break;
        case Piece::Type::Child: render_into(node.children[p.index], out); break;
        case Piece::Type::Arg: render_into(node.args[p.index], out); break;
        }
    }
}

void walk_impl(const AstNode& node, NodePath& path, const std::function<bool(const AstNode&, const NodePath&)>& fn)
{
    path.push_back(&node);
    if (fn(node, path)) {
        for (const AstNode* sub : node.subnodes()) walk_impl(*sub, path, fn);
    }
    path.pop_back();
}

void locate_impl(const AstNode& node, const Span& line, NodePath& path, std::vector<NodePath>& out)
{
    path.push_back(&node);
    bool descended = false;
    for (const AstNode* sub : node.subnodes()) {
        if (sub->span.empty() || !sub->span.intersects(line)) continue;
        descended = true;
        locate_impl(*sub, line, path, out);
    }
    if (!descended && path.size() > 1) out.push_back(path);
    path.pop_back();
}

}  // namespace

std::string render(const AstNode& node)
{
    std::string out;
    out.reserve(node.span.size());
    render_into(node, out);
    return out;
}

std::string render(const Ast& ast) { return render(ast.root); }

void walk(const AstNode& node, const std::function<bool(const AstNode&, const NodePath&)>& fn)
{
    NodePath path;
    walk_impl(node, path, fn);
}

std::size_t count_errors(const AstNode& node)
{
    std::size_t n = 0;
    walk(node, [&](const AstNode& x, const NodePath&) {
        if (x.is_error()) ++n;
        return true;
    });
    return n;
}

std::vector<NodePath> locate(const Ast& ast, const SourceDocument& doc, std::size_t line)
{
    if (line == 0 || line > doc.line_count()) return {};
    // The line's bytes including its terminator, so blank lines still hit nodes.
    std::size_t start = doc.line_start(line);
    std::size_t end = line < doc.line_count() ? doc.line_start(line + 1) : doc.size();
    Span range{start, end, line};
    std::vector<NodePath> out;
    NodePath path;
    locate_impl(ast.root, range, path, out);
    std::stable_sort(out.begin(), out.end(), [](const NodePath& a, const NodePath& b) { return a.size() > b.size(); });
    return out;
}

}  // namespace texrepair
