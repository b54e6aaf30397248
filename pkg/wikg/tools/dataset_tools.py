from wikg.schemas.commands import GenArgs
from wikg.services.data_service import gen_cooccurrence_dataset


def cmd_gen(args: GenArgs) -> dict:
    """Write a co-occurrence dataset with stratified folds."""
    dataset = gen_cooccurrence_dataset(
        args.out,
        n_bags=args.bags,
        instances=(args.min_instances, args.max_instances),
        d_in=args.d_in,
        noise_sigma=args.sigma,
        seed=args.seed,
        folds=args.folds,
    )
    return {
        "manifest": str(dataset.manifest_path),
        "n_bags": len(dataset.manifest.records),
        "folds": dataset.manifest.folds,
        "d_in": dataset.manifest.d_in,
    }
