from catalog.management.commands._base import AnalysisCommand


class Command(AnalysisCommand):
    help = "Viscous traveling-wave profile U' = f(U) - sigma U - q joining u- to u+"
    command = 'traveling_wave'
    kinds = ('flux',)

    def add_command_arguments(self, parser):
        parser.add_argument('--uminus', help='left state, comma separated')
        parser.add_argument('--uplus', help='right state, comma separated')
        parser.add_argument('--sigma', type=float, help='wave speed (scalar default: Rankine-Hugoniot)')
        parser.add_argument('--horizon', type=float, help='initial integration horizon')
        parser.add_argument('--tol', type=float, help='arrival tolerance at u+')
        parser.add_argument('--delta', type=float, help='radius of the unstable chart at u-')
