from pathlib import Path

from wikg.core.config import settings
from wikg.schemas.commands import ExportGraphArgs
from wikg.services.checkpoint_service import load_checkpoint
from wikg.services.data_service import load_node_meta, read_bag
from wikg.services.export_service import bag_graph_document, write_graph


def cmd_export_graph(args: ExportGraphArgs) -> dict:
    """Forward one bag in eval mode and write its graph with omega and pi per edge."""
    model = load_checkpoint(args.checkpoint)
    bag_path = Path(args.bag)
    bag = read_bag(bag_path)
    roots = [Path(args.meta_root)] if args.meta_root else [bag_path.parent, bag_path.parent.parent]
    for root in roots:
        meta = load_node_meta(root).get(bag.id)
        if meta is not None:
            bag.node_meta = meta
            break

    document = bag_graph_document(model, bag)
    out = Path(args.out) if args.out else Path(settings.output_dir) / "graphs" / f"{bag.id}.{args.format}"
    write_graph(document, out, fmt=args.format)
    return {"path": str(out), "n": document.n, "k": document.k, "edges": len(document.edges)}
