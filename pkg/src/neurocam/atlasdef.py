"""The shipped 132-parcel naming table and anatomical target sets.

132 parcels = 106 cortical/subcortical regions (43 bilateral cortical
pairs + 5 midline cortical + 7 bilateral subcortical pairs + brainstem)
plus 26 cerebellar regions (9 bilateral pairs + 8 vermis). Lateralized
parcels carry _l/_r suffixes. Lobe tags: Fro, Ins, Lim, Tem, Par, Occ,
Sbc (subcortical), Ceb (cerebellum), Bst (brainstem).

The canonical copy lives at data/atlas_labels.tsv (index, acronym, lobe)
and is the default for the CLI; this module regenerates it (run as
`python -m neurocam.atlasdef`) and provides the lookup helpers.
"""

from importlib import resources

# (acronym, lobe); bilateral entries expand to _l/_r in listed order
LATERAL_CORTICAL = [
    ("FP", "Fro"), ("SFG", "Fro"), ("MidFG", "Fro"), ("IFG_tri", "Fro"),
    ("IFG_oper", "Fro"), ("PreCG", "Fro"), ("SMA", "Fro"), ("FOrb", "Fro"),
    ("FO", "Fro"), ("CO", "Fro"),
    ("IC", "Ins"),
    ("PaCiG", "Lim"),
    ("TP", "Tem"), ("aSTG", "Tem"), ("pSTG", "Tem"), ("aMTG", "Tem"),
    ("pMTG", "Tem"), ("toMTG", "Tem"), ("aITG", "Tem"), ("pITG", "Tem"),
    ("toITG", "Tem"), ("aTFusC", "Tem"), ("pTFusC", "Tem"), ("PP", "Tem"),
    ("HG", "Tem"), ("PT", "Tem"), ("TOFusC", "Tem"),
    ("PostCG", "Par"), ("SPL", "Par"), ("aSMG", "Par"), ("pSMG", "Par"),
    ("AG", "Par"), ("PO", "Par"),
    ("sLOC", "Occ"), ("iLOC", "Occ"), ("ICC", "Occ"), ("Cuneal", "Occ"),
    ("LG", "Occ"), ("OFusG", "Occ"), ("SCC", "Occ"), ("OP", "Occ"),
    ("aPaHC", "Lim"), ("pPaHC", "Lim"),
]
MIDLINE_CORTICAL = [
    ("MedFC", "Fro"), ("SubCalC", "Lim"), ("AC", "Lim"), ("PC", "Lim"),
    ("PrCun", "Par"),
]
LATERAL_SUBCORTICAL = [
    ("Tha", "Sbc"), ("CaN", "Sbc"), ("Pu", "Sbc"), ("Pal", "Sbc"),
    ("Hip", "Lim"), ("Amg", "Lim"), ("NAcc", "Sbc"),
]
LATERAL_CEREBELLAR = [
    ("Cereb1", "Ceb"), ("Cereb2", "Ceb"), ("Cereb3", "Ceb"),
    ("Cereb45", "Ceb"), ("Cereb6", "Ceb"), ("Cereb7", "Ceb"),
    ("Cereb8", "Ceb"), ("Cereb9", "Ceb"), ("Cereb10", "Ceb"),
]
VERMIS = [
    ("Ver12", "Ceb"), ("Ver3", "Ceb"), ("Ver45", "Ceb"), ("Ver6", "Ceb"),
    ("Ver7", "Ceb"), ("Ver8", "Ceb"), ("Ver9", "Ceb"), ("Ver10", "Ceb"),
]

MTL_PARCELS = ["Hip_l", "Hip_r", "Amg_l", "Amg_r",
               "aPaHC_l", "aPaHC_r", "pPaHC_l", "pPaHC_r"]

# default-mode-network default: 3 midline + 14 bilateral regions -> 31 parcels
DMN_MIDLINE = ["MedFC", "PC", "PrCun"]
DMN_BILATERAL = ["FOrb", "PaCiG", "TP", "aMTG", "pMTG", "toMTG", "pSTG",
                 "AG", "aSMG", "pSMG", "Hip", "Amg", "aPaHC", "pPaHC"]


def parcel_table():
    """Ordered (acronym, lobe) pairs for the full 132-parcel scheme."""
    rows = []
    for name, lobe in LATERAL_CORTICAL:
        rows.append((f"{name}_l", lobe))
        rows.append((f"{name}_r", lobe))
    rows.extend(MIDLINE_CORTICAL)
    for name, lobe in LATERAL_SUBCORTICAL:
        rows.append((f"{name}_l", lobe))
        rows.append((f"{name}_r", lobe))
    rows.append(("BSt", "Bst"))
    for name, lobe in LATERAL_CEREBELLAR:
        rows.append((f"{name}_l", lobe))
        rows.append((f"{name}_r", lobe))
    rows.extend(VERMIS)
    assert len(rows) == 132
    return rows


def dmn_parcels():
    out = list(DMN_MIDLINE)
    for name in DMN_BILATERAL:
        out.append(f"{name}_l")
        out.append(f"{name}_r")
    return out


def names_tsv_text():
    lines = [f"{i}\t{name}\t{lobe}"
             for i, (name, lobe) in enumerate(parcel_table(), start=1)]
    return "\n".join(lines) + "\n"


def targets_toml_text():
    def fmt(items):
        return "[" + ", ".join(f'"{x}"' for x in items) + "]"
    return (
        "# Anatomical target parcel sets for the subgroup analysis.\n"
        "# MTL is fixed; the DMN membership has no unique definition and\n"
        "# may be edited to taste.\n\n"
        f"mtl = {fmt(MTL_PARCELS)}\n\n"
        f"dmn = {fmt(dmn_parcels())}\n"
    )


def default_names_path():
    return resources.files("neurocam") / "data" / "atlas_labels.tsv"


def default_targets_path():
    return resources.files("neurocam") / "data" / "targets.toml"


if __name__ == "__main__":
    import pathlib
    data_dir = pathlib.Path(__file__).parent / "data"
    data_dir.mkdir(exist_ok=True)
    (data_dir / "atlas_labels.tsv").write_text(names_tsv_text())
    (data_dir / "targets.toml").write_text(targets_toml_text())
    print(f"wrote {data_dir}/atlas_labels.tsv and targets.toml")
